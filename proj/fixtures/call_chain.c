int shared_sum = 0;

void log_event(int code);

void bump(int amount) {
    int cur;
    cur = shared_sum;
    shared_sum = cur + amount;
}

void unused_helper(void) {
    int scratch;
    scratch = 3;
    scratch = scratch + 1;
}

void main(void) {
    bump(2);
    log_event(shared_sum);
}

void ISR_1(void) {
    shared_sum = 0;
}
