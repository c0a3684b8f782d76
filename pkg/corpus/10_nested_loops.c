int main() {
    int i;
    int j;
    int acc;
    acc = 0;
    i = 0;
    while (i < 4) {
        j = 0;
        while (j < 3) {
            acc = acc + i * j;
            j = j + 1;
        }
        i = i + 1;
    }
    return acc;
}
