typedef struct node { struct node *next; int val; } node_t;

static node_t *head;

#ifndef OMITBAD
void case08_bad_free(node_t *n)
{
    free(n);
    head = n;
}
#endif

static int between(void) { return 42; }

#ifndef OMITGOOD
void case08_good_free(node_t *n)
{
    free(n);
    head = 0;
}
#endif
