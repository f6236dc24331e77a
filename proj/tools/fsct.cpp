#include <cstdio>

int main() {
    std::puts("fsct: cli under construction");
    return 1;
}
