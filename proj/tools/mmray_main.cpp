#include <cstdio>
int main() { std::puts("mmray"); return 0; }
