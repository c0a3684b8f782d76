int main() {
    int x;
    int y;
    x = __VERIFIER_nondet_int();
    if (x > 0) {
        y = x;
    } else {
        y = 0 - x;
    }
    return y;
}
