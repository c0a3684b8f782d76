int main() {
    int value;
    int *ptr;
    int out;
    value = 7;
    ptr = &value;
    *ptr = 9;
    out = value;
    return out;
}
