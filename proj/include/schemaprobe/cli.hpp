#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace schemaprobe {

// Exit codes are the machine contract of the command line.
inline constexpr int kExitOk = 0;
inline constexpr int kExitHarmful = 1;  // guard verdict; also generic failure
inline constexpr int kExitPartial = 2;
inline constexpr int kExitConfig = 3;   // manifest/config problem; guard error
inline constexpr int kExitUsage = 64;

struct CliStreams {
  std::ostream& out;
  std::ostream& err;
  std::istream& in;
  const std::atomic<bool>* cancel = nullptr;
};

// Runs one command. argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv, const CliStreams& io);

}  // namespace schemaprobe
