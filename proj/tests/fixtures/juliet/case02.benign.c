int shared(int v) { return v; }
int CWE190_case02_good(int v)
{
    if (v < 100) { v = v + 1; }
    return shared(v);
}
int CWE190_case02_bad(int v)
{
    return shared(v + 1);
}
