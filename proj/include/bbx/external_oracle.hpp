#pragma once

#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "bbx/errors.hpp"
#include "bbx/image.hpp"
#include "bbx/oracle.hpp"

namespace bbx {

// Child-process oracle speaking a line protocol over stdin/stdout:
//   request:  "<h> <w> <c> <hex>\n" where <hex> encodes each value as the 8
//             lowercase hex digits of its little-endian float32 bytes,
//             row-major (row, column, channel)
//   response: "L <label>" or "P <p0> <p1> ..." (the server picks per query)
// A "P" response also serves label queries via argmax; a probability query
// answered with "L" is a protocol error.
class ExternalOracle final : public Oracle {
 public:
  ExternalOracle(std::vector<std::string> command, int num_classes, bool expects_probabilities)
      : classes_(num_classes), has_proba_(expects_probabilities) {
    if (command.empty()) throw ParamError("external oracle: empty command");
    if (classes_ < 2) throw ParamError("external oracle: need at least 2 classes");
    spawn(command);
  }

  ExternalOracle(const ExternalOracle&) = delete;
  ExternalOracle& operator=(const ExternalOracle&) = delete;

  ~ExternalOracle() override {
    if (to_child_) std::fclose(to_child_);
    if (from_child_) std::fclose(from_child_);
    if (pid_ > 0) waitpid(pid_, nullptr, 0);
  }

  ProbabilityVector predict_proba(const Image& x) override {
    if (!has_proba_)
      throw ProbabilityAccessError("external oracle: configured as label-only");
    const std::string reply = exchange(x);
    if (reply.rfind("P ", 0) != 0)
      throw OracleProtocolError("external oracle: expected probabilities, got: " + reply);
    std::istringstream in(reply.substr(2));
    ProbabilityVector p;
    double v = 0.0;
    while (in >> v) p.push_back(v);
    if (static_cast<int>(p.size()) != classes_ || !probability_vector_valid(p))
      throw OracleProtocolError("external oracle: malformed probability reply: " + reply);
    return p;
  }

  int predict_label(const Image& x) override {
    const std::string reply = exchange(x);
    if (reply.rfind("P ", 0) == 0) {
      std::istringstream in(reply.substr(2));
      ProbabilityVector p;
      double v = 0.0;
      while (in >> v) p.push_back(v);
      if (static_cast<int>(p.size()) != classes_ || !probability_vector_valid(p))
        throw OracleProtocolError("external oracle: malformed probability reply: " + reply);
      return argmax_label(p);
    }
    if (reply.rfind("L ", 0) == 0) {
      errno = 0;
      char* end = nullptr;
      const long label = std::strtol(reply.c_str() + 2, &end, 10);
      if (errno != 0 || end == reply.c_str() + 2 || label < 0 || label >= classes_)
        throw OracleProtocolError("external oracle: bad label reply: " + reply);
      return static_cast<int>(label);
    }
    throw OracleProtocolError("external oracle: unrecognized reply: " + reply);
  }

  bool has_probabilities() const override { return has_proba_; }
  int num_classes() const override { return classes_; }

 private:
  void spawn(const std::vector<std::string>& command) {
    int to_pipe[2], from_pipe[2];
    if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0)
      throw InitFailure("external oracle: pipe() failed");
    pid_ = fork();
    if (pid_ < 0) throw InitFailure("external oracle: fork() failed");
    if (pid_ == 0) {
      dup2(to_pipe[0], STDIN_FILENO);
      dup2(from_pipe[1], STDOUT_FILENO);
      close(to_pipe[0]);
      close(to_pipe[1]);
      close(from_pipe[0]);
      close(from_pipe[1]);
      std::vector<char*> argv;
      argv.reserve(command.size() + 1);
      for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
      argv.push_back(nullptr);
      execvp(argv[0], argv.data());
      std::perror("external oracle exec");
      _exit(127);
    }
    close(to_pipe[0]);
    close(from_pipe[1]);
    to_child_ = fdopen(to_pipe[1], "w");
    from_child_ = fdopen(from_pipe[0], "r");
    if (!to_child_ || !from_child_) throw InitFailure("external oracle: fdopen() failed");
  }

  std::string exchange(const Image& x) {
    std::string line = std::to_string(x.height) + " " + std::to_string(x.width) + " " +
                       std::to_string(x.channels) + " ";
    line.reserve(line.size() + 8 * x.data.size() + 1);
    static const char* hex = "0123456789abcdef";
    for (double v : x.data) {
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int byte = 0; byte < 4; ++byte) {  // little-endian byte order
        const unsigned b = (bits >> (8 * byte)) & 0xFF;
        line.push_back(hex[b >> 4]);
        line.push_back(hex[b & 0xF]);
      }
    }
    line.push_back('\n');
    // Writing to a child that already exited raises SIGPIPE, which would kill
    // the process; mask it for this thread so the failure is thrown instead.
    sigset_t pipe_set, old_set;
    sigemptyset(&pipe_set);
    sigaddset(&pipe_set, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);
    const bool wrote = std::fwrite(line.data(), 1, line.size(), to_child_) == line.size() &&
                       std::fflush(to_child_) == 0;
    if (!wrote) {
      timespec zero{};
      sigtimedwait(&pipe_set, nullptr, &zero);  // swallow the pending SIGPIPE
    }
    pthread_sigmask(SIG_SETMASK, &old_set, nullptr);
    if (!wrote) throw OracleProtocolError("external oracle: write to child failed");

    std::string reply;
    int c = 0;
    while ((c = std::fgetc(from_child_)) != EOF && c != '\n') reply.push_back(static_cast<char>(c));
    if (reply.empty() && c == EOF)
      throw OracleProtocolError("external oracle: child closed the pipe");
    if (!reply.empty() && reply.back() == '\r') reply.pop_back();
    return reply;
  }

  int classes_ = 0;
  bool has_proba_ = true;
  pid_t pid_ = -1;
  std::FILE* to_child_ = nullptr;
  std::FILE* from_child_ = nullptr;
};

}  // namespace bbx
