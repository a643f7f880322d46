#include <stdlib.h>
#include <string.h>
#include <stdio.h>
#include "util.h"

static char scratch[64];

int bounds_ok(int n, int len)
{
    return n >= 0 && n < len;
}

void grow_buffer(unsigned char *out, int n)
{
    memset(out + n, 0, 4);
}

void expand(unsigned char *out, int n)
{
    if (n > 8) grow_buffer(out, n);
}

void log_msg(const char *msg)
{
    char *hex = to_hex((unsigned)msg[0]);
    fprintf(stderr, "[scan] %s %s\n", msg, hex);
}

char *to_hex(unsigned v)
{
    snprintf(scratch, sizeof(scratch), "%08x", v);
    return scratch;
}

char *memdup(const char *p, int len)
{
    char *copy = malloc((size_t)len + 1);
    if (copy) memcpy(copy, p, (size_t)len);
    return copy;
}

void release_all(void)
{
    fflush(stderr);
}
