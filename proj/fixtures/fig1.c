int DevVal = 5;
int latch;

void main(void) {
    disable_isr(-1);
    enable_isr(1);
    if (DevVal > 3) {
        DevVal = 1;
    } else {
        DevVal = 0;
    }
}

void ISR_1(void) {
    enable_isr(2);
    latch = DevVal;
}

void ISR_2(void) {
    int tmp = DevVal;
    DevVal = tmp + 4;
    DevVal = 2;
}

void ISR_3(void) {
    DevVal = 9;
}
