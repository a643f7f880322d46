static char *case10_goodG2BSource(char *data)
{
    strcpy(data, "fixed-string");
    return data;
}
void case10_goodG2B(void)
{
    char data[64];
    case10_goodG2BSource(data);
}
