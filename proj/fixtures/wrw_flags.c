int flags = 0;
int mirror = 0;

void main(void) {
    flags = 1;
    flags = 3;
}

void ISR_1(void) {
    mirror = flags;
}
