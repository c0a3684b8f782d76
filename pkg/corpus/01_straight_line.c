int main() {
    int a;
    int b;
    a = 1;
    b = a + 2;
    a = b * b;
    return a;
}
