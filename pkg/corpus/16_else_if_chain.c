int main() {
    int v;
    int bucket;
    v = __VERIFIER_nondet_int();
    if (v < 10) {
        bucket = 0;
    } else if (v < 100) {
        bucket = 1;
    } else {
        bucket = 2;
    }
    return bucket;
}
