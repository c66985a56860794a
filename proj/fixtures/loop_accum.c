int ticks = 0;

void main(void) {
    int i;
    int t;
    for (i = 0; i < 3; i = i + 1) {
        t = ticks;
        ticks = t + 1;
    }
}

void ISR_1(void) {
    ticks = 0;
}
