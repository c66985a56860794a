int burst = 0;
int quiet_flag = 0;
int third = 0;

void main(void) {
    int s;
    s = burst;
    burst = s + 1;
    quiet_flag = 1;
    quiet_flag = 2;
    s = third;
    third = s + 3;
}

void ISR_1(void) {
    burst = 5;
    third = 1;
}

void ISR_2(void) {
    int t;
    t = quiet_flag;
    burst = 6;
}
