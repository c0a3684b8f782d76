typedef int word;

word widen(word w) {
    return w * 2;
}

int main() {
    word value;
    value = widen(5);
    return value;
}
