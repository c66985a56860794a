int counter = 0;
int log_val = 0;

void main(void) {
    int snap;
    disable_isr(-1);
    snap = counter;
    counter = snap + 1;
    enable_isr(-1);
    log_val = counter;
    snap = log_val;
}

void ISR_1(void) {
    counter = 10;
    log_val = 20;
}
