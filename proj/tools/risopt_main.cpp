#include <cstdio>
int main() { std::puts("risopt placeholder"); return 0; }
