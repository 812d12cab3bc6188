#include <atomic>
#include <csignal>
#include <iostream>

#include "schemaprobe/cli.hpp"

namespace {
std::atomic<bool> g_cancel{false};
extern "C" void on_sigint(int) { g_cancel.store(true); }
}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);
  std::signal(SIGTERM, on_sigint);
  std::vector<std::string> args(argv, argv + argc);
  return schemaprobe::run_cli(args, {std::cout, std::cerr, std::cin, &g_cancel});
}
