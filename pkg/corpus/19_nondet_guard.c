void fail() {
    BAD: __VERIFIER_error();
}

int main() {
    int lim;
    int i;
    lim = __VERIFIER_nondet_int();
    i = 0;
    while (i < lim) {
        i = i + 2;
    }
    if (i > lim + 1) fail();
    return 0;
}
