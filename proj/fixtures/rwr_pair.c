int sensor = 0;

void main(void) {
    int first;
    int second;
    first = sensor;
    second = sensor;
    if (first != second) {
        first = second;
    }
}

void ISR_1(void) {
    sensor = sensor + 2;
}
