int main() {
    int x;
    x = 0;
    START: x = x + 1;
    x = x * 2;
    DONE: x = x - 1;
    return x;
}
