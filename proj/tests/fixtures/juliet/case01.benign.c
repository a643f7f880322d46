#include <stdio.h>

static void helper(int n)
{
    printf("%d\n", n);
}


void CWE121_case01_good(void)
{
    char buf[8];
    buf[7] = 'x';
    helper(7);
}
