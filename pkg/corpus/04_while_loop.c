int main() {
    int i;
    int n;
    n = __VERIFIER_nondet_int();
    i = 0;
    while (i < n) {
        i = i + 1;
    }
    return i;
}
