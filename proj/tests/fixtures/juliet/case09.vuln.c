int case09_bad(int n) { return 100 / n; }
int main(void)
{
    return 0;
}
