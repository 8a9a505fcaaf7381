// placeholder, filled in with the pipeline module
int main() { return 0; }
