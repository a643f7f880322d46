#include <stdio.h>

static void helper(int n)
{
    printf("%d\n", n);
}

#ifndef OMITBAD
void CWE121_case01_bad(void)
{
    char buf[8];
    buf[8] = 'x';
    helper(8);
}
#endif

#ifndef OMITGOOD
void CWE121_case01_good(void)
{
    char buf[8];
    buf[7] = 'x';
    helper(7);
}
#endif
