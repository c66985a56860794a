int txbuf = 0;

void main(void) {
    int echo;
    txbuf = 12;
    echo = txbuf;
    if (echo != 12) {
        echo = 0;
    }
}

void ISR_1(void) {
    txbuf = 99;
}
