int ring[4];
int head = 0;

void main(void) {
    int i;
    for (i = 0; i < 2; i = i + 1) {
        ring[i] = head;
        head = head + 1;
    }
    ring[3] = ring[0];
}

void ISR_1(void) {
    ring[0] = 7;
    head = 0;
}
