int main() {
    int x;
    int y;
    x = __VERIFIER_nondet_int();
    y = 0;
    switch (x) {
        case 1: y = 1; break;
        case 2: y = 2;
        default: y = y + 3;
    }
    return y;
}
