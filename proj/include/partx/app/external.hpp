#pragma once

#include <cerrno>
#include <cstring>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "partx/app/io.hpp"
#include "partx/errors.hpp"
#include "partx/hyperbox.hpp"

namespace partx::app {

/// Runs `argv` once per evaluation. The point goes to the child's stdin as one
/// line of comma-separated decimals; the child prints a single decimal value.
/// A non-zero exit, a signal, or output that is not exactly one number is an
/// EvaluationError. Safe to call from several threads at once.
class ExternalObjective {
 public:
  explicit ExternalObjective(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw ConfigInvalid("external objective: empty command");
  }

  const std::vector<std::string>& argv() const noexcept { return argv_; }

  double operator()(const Point& x) const {
    std::string input;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (i) input += ',';
      input += format_double(x[i]);
    }
    input += '\n';

    int to_child[2], from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) fail(x, "pipe failed");
    if (pipe2(from_child, O_CLOEXEC) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      fail(x, "pipe failed");
    }
    std::vector<char*> args;
    for (const auto& a : argv_) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) close(fd);
      fail(x, "fork failed");
    }
    if (pid == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      execvp(args[0], args.data());
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);

    // The input is one short line; a child that never reads it just gets EPIPE
    // on our side, which is not an error by itself.
    const char* p = input.data();
    std::size_t left = input.size();
    while (left > 0) {
      const ssize_t w = write(to_child[1], p, left);
      if (w < 0) {
        if (errno == EINTR) continue;
        break;
      }
      p += w;
      left -= static_cast<std::size_t>(w);
    }
    close(to_child[1]);

    std::string output;
    char buf[512];
    for (;;) {
      const ssize_t r = read(from_child[0], buf, sizeof buf);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) break;
      output.append(buf, static_cast<std::size_t>(r));
    }
    close(from_child[0]);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFSIGNALED(status)) fail(x, "command killed by signal " + std::to_string(WTERMSIG(status)));
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      fail(x, "command exited with status " + std::to_string(WEXITSTATUS(status)));
    double y = 0.0;
    if (!parse_double(output, y)) fail(x, "unparseable output '" + output.substr(0, 80) + "'");
    return y;
  }

 private:
  [[noreturn]] static void fail(const Point& x, const std::string& what) {
    throw EvaluationError("external objective: " + what, to_std(x));
  }

  std::vector<std::string> argv_;
};

}  // namespace partx::app
