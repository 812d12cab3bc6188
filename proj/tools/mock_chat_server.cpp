// Serves a scripted chat-completions endpoint on 127.0.0.1 until stdin
// closes or SIGINT arrives. Prints the bound URL on the first line.
#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "schemaprobe/error.hpp"
#include "schemaprobe/mock_server.hpp"

namespace {
std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop.store(true); }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scripted mock chat-completions server (loopback only)"};
  std::string script_path;
  int port = 0;
  bool wait_stdin = false;
  app.add_option("script", script_path, "script file (JSON)")->required();
  app.add_option("--port", port, "port to bind (0 = any free port)");
  app.add_flag("--until-stdin-closes", wait_stdin, "exit when standard input reaches end of file");
  CLI11_PARSE(app, argc, argv);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    schemaprobe::MockChatServer server(schemaprobe::load_mock_script(script_path));
    server.start(port);
    std::cout << server.url() << std::endl;
    if (wait_stdin) {
      std::thread([] {
        std::string line;
        while (std::getline(std::cin, line)) {
        }
        g_stop.store(true);
      }).detach();
    }
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    std::cerr << "served " << server.request_count() << " requests\n";
  } catch (const schemaprobe::Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
