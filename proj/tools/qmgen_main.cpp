#include <cstdio>

int main() {
  std::puts("qmgen: CLI wiring lands with the harness module");
  return 0;
}
