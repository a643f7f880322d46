int bounds_ok(int n, int len);
void expand(unsigned char *out, int n);
void grow_buffer(unsigned char *out, int n);
void log_msg(const char *msg);
char *to_hex(unsigned v);
char *memdup(const char *p, int len);
void release_all(void);
int read_header(const unsigned char *buf, int len);
int read_body(const unsigned char *buf, int len, unsigned char *out);
int parse_input(const unsigned char *data, int size, unsigned char *out);
int decode_chunk(const unsigned char *buf, int len, unsigned char *out);
char *copy_name(const unsigned char *buf, int len);
