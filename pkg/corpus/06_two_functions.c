int twice(int v) {
    return v + v;
}

int main() {
    int x;
    x = twice(21);
    return x;
}
