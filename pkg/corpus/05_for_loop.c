int main() {
    int s;
    int i;
    s = 0;
    for (i = 0; i < 8; i = i + 1) {
        s = s + i;
    }
    return s;
}
