int main() {
    int i;
    int s;
    s = 0;
    for (i = 0; i < 10; i++) {
        if (i == 3) continue;
        if (s > 12) break;
        s += i;
    }
    return s;
}
