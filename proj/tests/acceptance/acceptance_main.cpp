// Placeholder; the acceptance suite is filled in once the library lands.
int main() { return 1; }
