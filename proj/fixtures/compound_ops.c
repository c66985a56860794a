int total = 0;
int steps = 0;

void main(void) {
    total += 4;
    steps++;
    total = total - steps;
}

void ISR_1(void) {
    total = 100;
    steps += 2;
}
