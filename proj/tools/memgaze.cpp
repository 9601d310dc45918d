#include <cstdio>

int main() {
  std::puts("memgaze: cli not wired yet");
  return 1;
}
