#include <stdio.h>

static void helper(int n)
{
    printf("%d\n", n);
}

void CWE121_case01_bad(void)
{
    char buf[8];
    buf[8] = 'x';
    helper(8);
}

