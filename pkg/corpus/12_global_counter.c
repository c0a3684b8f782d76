int g;

int touch() {
    g = g + 1;
    return g;
}

int main() {
    int t;
    g = 0;
    t = touch();
    t = touch();
    return t;
}
