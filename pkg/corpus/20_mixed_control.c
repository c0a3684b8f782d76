int clamp(int v, int hi) {
    if (v > hi) return hi;
    return v;
}

int main() {
    int i;
    int worst;
    worst = 0;
    for (i = 0; i < 6; i++) {
        int c;
        c = clamp(i * 3, 10);
        if (c > worst) worst = c;
    }
    return worst;
}
