int solo = 0;

void main(void) {
    solo = 1;
    solo = solo + 2;
}

void ISR_1(void) {
    int local;
    local = 4;
    local = local + 1;
}
