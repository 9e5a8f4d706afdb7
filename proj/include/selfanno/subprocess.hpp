// Copyright (c) 2026, The selfanno Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cerrno>
#include <csignal>
#include <cstring>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "selfanno/errors.hpp"

namespace selfanno {

/// Splits a command line on whitespace, honoring single and double quotes and
/// backslash escapes. No other shell syntax is interpreted.
inline std::vector<std::string> split_command_line(const std::string &line) {
  std::vector<std::string> args;
  std::string cur;
  bool in_word = false;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quote) {
      if (ch == quote) {
        quote = 0;
      } else if (ch == '\\' && quote == '"' && i + 1 < line.size()) {
        cur.push_back(line[++i]);
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
      in_word = true;
    } else if (ch == '\\' && i + 1 < line.size()) {
      cur.push_back(line[++i]);
      in_word = true;
    } else if (ch == ' ' || ch == '\t' || ch == '\n') {
      if (in_word) args.push_back(cur);
      cur.clear();
      in_word = false;
    } else {
      cur.push_back(ch);
      in_word = true;
    }
  }
  if (quote) throw SpawnError("unterminated quote in command line");
  if (in_word) args.push_back(cur);
  return args;
}

/// A child process whose stdin/stdout are connected to pipes. Line-oriented
/// reads; stderr is inherited.
class ChildProcess {
 public:
  explicit ChildProcess(const std::vector<std::string> &argv) {
    if (argv.empty()) throw SpawnError("empty command");
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2], exec_err[2];
    if (pipe(to_child) != 0) throw SpawnError(std::strerror(errno));
    if (pipe(from_child) != 0) {
      close_pair(to_child);
      throw SpawnError(std::strerror(errno));
    }
    if (pipe2(exec_err, O_CLOEXEC) != 0) {
      close_pair(to_child);
      close_pair(from_child);
      throw SpawnError(std::strerror(errno));
    }
    std::vector<char *> cargv;
    for (const auto &a : argv) cargv.push_back(const_cast<char *>(a.c_str()));
    cargv.push_back(nullptr);

    pid_ = fork();
    if (pid_ < 0) {
      close_pair(to_child);
      close_pair(from_child);
      close_pair(exec_err);
      throw SpawnError(std::strerror(errno));
    }
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::close(exec_err[0]);
      execvp(cargv[0], cargv.data());
      const int err = errno;
      [[maybe_unused]] auto n = ::write(exec_err[1], &err, sizeof err);
      _exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    ::close(exec_err[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    int err = 0;
    const auto n = ::read(exec_err[0], &err, sizeof err);
    ::close(exec_err[0]);
    if (n == static_cast<ssize_t>(sizeof err)) {
      wait_exit();
      ::close(in_fd_);
      ::close(out_fd_);
      in_fd_ = out_fd_ = -1;
      throw SpawnError("cannot execute '" + argv[0] + "': " + std::strerror(err));
    }
  }

  ChildProcess(const ChildProcess &) = delete;
  ChildProcess &operator=(const ChildProcess &) = delete;

  ~ChildProcess() { terminate(); }

  /// Writes the whole string; false if the child has gone away.
  bool write_all(const std::string &data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::write(in_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  /// Reads one '\n'-terminated line (without the terminator). Returns false on
  /// EOF or when timeout_ms elapses.
  bool read_line(std::string &line, int timeout_ms) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      pollfd pfd{out_fd_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, timeout_ms);
      if (pr < 0 && errno == EINTR) continue;
      if (pr <= 0) return false;
      char chunk[65536];
      const auto n = ::read(out_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  /// Closes stdin and waits up to grace_ms for a clean exit before killing.
  int terminate(int grace_ms = 2000) {
    if (pid_ <= 0) return exit_status_;
    if (in_fd_ >= 0) {
      ::close(in_fd_);
      in_fd_ = -1;
    }
    for (int waited = 0; waited < grace_ms; waited += 10) {
      int status = 0;
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        break;
      }
      usleep(10000);
    }
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      wait_exit();
    }
    if (out_fd_ >= 0) {
      ::close(out_fd_);
      out_fd_ = -1;
    }
    return exit_status_;
  }

  bool running() const { return pid_ > 0; }

 private:
  static void close_pair(int p[2]) {
    ::close(p[0]);
    ::close(p[1]);
  }
  void wait_exit() {
    int status = 0;
    while (waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    pid_ = -1;
  }

  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  int exit_status_ = -1;
  std::string buffer_;
};

}  // namespace selfanno
