int left = 1;
int right = 2;
int *cursor;

void main(void) {
    int t;
    cursor = &left;
    t = *cursor;
    *cursor = t + 1;
    cursor = &right;
    *cursor = 0;
}

void ISR_1(void) {
    left = 50;
    right = 60;
}
