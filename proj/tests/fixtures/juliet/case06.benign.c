int base(void) { return 0; }
int case06_good(void)
{
    int v = 0;
    return v;
}
