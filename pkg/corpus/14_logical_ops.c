int main() {
    int a;
    int b;
    int ok;
    a = __VERIFIER_nondet_int();
    b = __VERIFIER_nondet_int();
    ok = 0;
    if (a > 0 && b > 0) ok = 1;
    if (!ok || a == b) ok = ok + 2;
    return ok;
}
