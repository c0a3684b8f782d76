int main() {
    int acc;
    int step;
    acc = 1;
    step = 3;
    acc += step;
    acc *= 2;
    acc -= step;
    step++;
    acc %= 7;
    return acc + step;
}
