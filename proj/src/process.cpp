#include "dockorder/process.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace dockorder {

namespace {

void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
}

}  // namespace

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

ProcessOutcome run_process(const std::vector<std::string>& argv, const std::optional<std::string>& cwd) {
    ProcessOutcome outcome;
    if (argv.empty()) {
        outcome.exec_failed = true;
        outcome.exec_error = "empty command";
        return outcome;
    }
    int out_pipe[2], err_pipe[2], status_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0 || pipe2(status_pipe, O_CLOEXEC) != 0) {
        outcome.exec_failed = true;
        outcome.exec_error = std::strerror(errno);
        return outcome;
    }
    pid_t pid = fork();
    if (pid < 0) {
        outcome.exec_failed = true;
        outcome.exec_error = std::strerror(errno);
        return outcome;
    }
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        ::close(status_pipe[0]);
        if (cwd && chdir(cwd->c_str()) != 0) {
            int e = errno;
            (void)!write(status_pipe[1], &e, sizeof e);
            _exit(127);
        }
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        int e = errno;
        (void)!write(status_pipe[1], &e, sizeof e);
        _exit(127);
    }
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::close(status_pipe[1]);

    int fds[2] = {out_pipe[0], err_pipe[0]};
    std::string* sinks[2] = {&outcome.result.out, &outcome.result.err};
    char buf[65536];
    while (fds[0] >= 0 || fds[1] >= 0) {
        pollfd p[2];
        int n = 0;
        int map[2];
        for (int i = 0; i < 2; ++i)
            if (fds[i] >= 0) {
                p[n] = {fds[i], POLLIN, 0};
                map[n++] = i;
            }
        if (poll(p, static_cast<nfds_t>(n), -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int k = 0; k < n; ++k) {
            if (!(p[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            ssize_t got = read(p[k].fd, buf, sizeof buf);
            if (got > 0) sinks[map[k]]->append(buf, static_cast<std::size_t>(got));
            else close_fd(fds[map[k]]);
        }
    }
    close_fd(fds[0]);
    close_fd(fds[1]);

    int child_errno = 0;
    ssize_t got = read(status_pipe[0], &child_errno, sizeof child_errno);
    ::close(status_pipe[0]);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (got == static_cast<ssize_t>(sizeof child_errno)) {
        outcome.exec_failed = true;
        outcome.exec_error = std::strerror(child_errno);
    }
    outcome.result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return outcome;
}

}  // namespace dockorder
