struct Chan { int data; int ready; };
struct Chan ch;

void main(void) {
    ch.data = 41;
    ch.ready = 1;
    if (ch.ready > 0) {
        ch.data = ch.data + 1;
    }
}

void ISR_1(void) {
    ch.ready = 0;
    ch.data = 9;
}
