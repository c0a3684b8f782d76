int sum(int n) {
    int rest;
    if (n <= 0) return 0;
    rest = sum(n - 1);
    return n + rest;
}

int main() {
    int total;
    total = sum(4);
    return total;
}
