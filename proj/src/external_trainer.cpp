#include "labelbudget/external_trainer.hpp"

#include <csignal>
#include <cstring>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

#include "labelbudget/error.hpp"

namespace labelbudget {

using ordered_json = nlohmann::ordered_json;

std::string format_request(const TrainRequest& r) {
    ordered_json j;
    j["cmd"] = "train";
    j["train"] = r.train.string();
    j["val"] = r.val.string();
    j["test"] = r.test.string();
    j["seed"] = r.config.seed;
    j["max_epochs"] = r.config.max_epochs;
    j["patience"] = r.config.patience;
    j["lr"] = r.config.learning_rate;
    return j.dump();
}

TrainRequest parse_request(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        if (j.at("cmd").get<std::string>() != "train")
            throw ProtocolError(fmt::format("unsupported cmd '{}'", j.at("cmd").get<std::string>()));
        TrainRequest r;
        r.train = j.at("train").get<std::string>();
        r.val = j.at("val").get<std::string>();
        r.test = j.at("test").get<std::string>();
        r.config.seed = j.at("seed").get<std::uint64_t>();
        r.config.max_epochs = j.at("max_epochs").get<int>();
        r.config.patience = j.at("patience").get<int>();
        r.config.learning_rate = j.at("lr").get<double>();
        r.config.validate();
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw ProtocolError(fmt::format("malformed train request: {}", ex.what()));
    }
}

std::string format_epoch_event(int epoch, double val_iou) {
    ordered_json j;
    j["event"] = "epoch";
    j["epoch"] = epoch;
    j["val_iou"] = val_iou;
    return j.dump();
}

std::string format_done_event(double test_iou, int best_epoch) {
    ordered_json j;
    j["event"] = "done";
    j["test_iou"] = test_iou;
    j["best_epoch"] = best_epoch;
    return j.dump();
}

namespace {

double unit_number(const nlohmann::json& j, const char* key, std::size_t line_number) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ProtocolError(fmt::format("line {}: '{}' is not a number", line_number, key));
    const double x = v.get<double>();
    if (!(x >= 0.0 && x <= 1.0)) throw ProtocolError(fmt::format("line {}: '{}' = {} outside [0, 1]", line_number, key, x));
    return x;
}

int integer(const nlohmann::json& j, const char* key, std::size_t line_number) {
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ProtocolError(fmt::format("line {}: '{}' is not an integer", line_number, key));
    return v.get<int>();
}

}  // namespace

TrainerEvent parse_event(std::string_view line, std::size_t line_number) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError(fmt::format("line {}: not valid JSON: '{}'", line_number, line));
    }
    if (!j.is_object() || !j.contains("event") || !j["event"].is_string())
        throw ProtocolError(fmt::format("line {}: missing string field 'event'", line_number));
    try {
        TrainerEvent ev;
        const auto kind = j["event"].get<std::string>();
        if (kind == "epoch") {
            ev.kind = TrainerEvent::Kind::epoch;
            ev.epoch = integer(j, "epoch", line_number);
            ev.val_iou = unit_number(j, "val_iou", line_number);
            if (ev.epoch < 1) throw ProtocolError(fmt::format("line {}: epoch must be >= 1", line_number));
        } else if (kind == "done") {
            ev.kind = TrainerEvent::Kind::done;
            ev.test_iou = unit_number(j, "test_iou", line_number);
            ev.best_epoch = integer(j, "best_epoch", line_number);
            if (ev.best_epoch < 0) throw ProtocolError(fmt::format("line {}: best_epoch must be >= 0", line_number));
        } else {
            throw ProtocolError(fmt::format("line {}: unknown event '{}'", line_number, kind));
        }
        return ev;
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError(fmt::format("line {}: event is missing a required field: '{}'", line_number, line));
    }
}

// ---------------------------------------------------------------------------
// Process supervision
// ---------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

class ChildProcess {
public:
    explicit ChildProcess(const std::string& command) {
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0) throw ProtocolError(fmt::format("pipe failed: {}", std::strerror(errno)));
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw ProtocolError(fmt::format("pipe failed: {}", std::strerror(errno)));
        }
        pid_ = ::fork();
        if (pid_ < 0) throw ProtocolError(fmt::format("fork failed: {}", std::strerror(errno)));
        if (pid_ == 0) {
            ::setpgid(0, 0);
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::setpgid(pid_, pid_);
        ::close(to_child[0]);
        ::close(from_child[1]);
        stdin_fd_ = to_child[1];
        stdout_fd_ = from_child[0];
    }

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    ~ChildProcess() {
        close_stdin();
        if (stdout_fd_ >= 0) ::close(stdout_fd_);
        if (pid_ > 0 && !reaped_) {
            kill();
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
    }

    void write_line(const std::string& line) {
        std::string data = line + "\n";
        std::size_t off = 0;
        while (off < data.size()) {
            const auto n = ::write(stdin_fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(fmt::format("writing request failed: {}", std::strerror(errno)));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    void close_stdin() {
        if (stdin_fd_ >= 0) ::close(stdin_fd_);
        stdin_fd_ = -1;
    }

    /// Next stdout line, std::nullopt at EOF. Throws on timeout.
    std::optional<std::string> read_line(Clock::time_point deadline) {
        for (;;) {
            if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
                auto line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            if (eof_) {
                if (buffer_.empty()) return std::nullopt;
                return std::exchange(buffer_, {});
            }
            const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
            if (remaining.count() <= 0) throw ProtocolError("trainer timed out");
            pollfd pfd{stdout_fd_, POLLIN, 0};
            const int r = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
            if (r < 0 && errno != EINTR) throw ProtocolError(fmt::format("poll failed: {}", std::strerror(errno)));
            if (r <= 0) continue;
            char chunk[4096];
            const auto n = ::read(stdout_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(fmt::format("reading trainer output failed: {}", std::strerror(errno)));
            }
            if (n == 0) eof_ = true;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    /// Exit status once the process ends; throws on timeout.
    int wait(Clock::time_point deadline) {
        for (;;) {
            int status = 0;
            const pid_t r = ::waitpid(pid_, &status, WNOHANG);
            if (r == pid_) {
                reaped_ = true;
                if (WIFEXITED(status)) return WEXITSTATUS(status);
                return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
            }
            if (r < 0 && errno != EINTR) throw ProtocolError(fmt::format("waitpid failed: {}", std::strerror(errno)));
            if (Clock::now() >= deadline) throw ProtocolError("trainer timed out waiting for exit");
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
    }

    void kill() noexcept {
        if (pid_ > 0 && !reaped_) {
            ::kill(-pid_, SIGKILL);
            ::kill(pid_, SIGKILL);
        }
    }

private:
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    bool eof_ = false;
    bool reaped_ = false;
    std::string buffer_;
};

}  // namespace

RunResult run_external(const std::string& command, const TrainRequest& request, const ExternalOptions& options) {
    request.config.validate();
    ignore_sigpipe();
    const auto deadline = Clock::now() + options.timeout;
    ChildProcess child(command);
    child.write_line(format_request(request));
    child.close_stdin();

    RunResult result;
    std::optional<TrainerEvent> done;
    int last_epoch = 0;
    bool harness_stopped = false;
    double best = -1.0;
    int since_best = 0;
    std::size_t line_number = 0;
    while (auto line = child.read_line(deadline)) {
        ++line_number;
        if (line->empty()) continue;
        const auto ev = parse_event(*line, line_number);
        if (done) throw ProtocolError(fmt::format("line {}: output after the done event", line_number));
        if (ev.kind == TrainerEvent::Kind::done) {
            done = ev;
            continue;
        }
        if (ev.epoch != last_epoch + 1)
            throw ProtocolError(fmt::format("line {}: epoch {} follows epoch {}", line_number, ev.epoch, last_epoch));
        last_epoch = ev.epoch;
        if (ev.epoch > request.config.max_epochs)
            throw ProtocolError(fmt::format("line {}: epoch {} exceeds max_epochs {}", line_number, ev.epoch,
                                            request.config.max_epochs));
        if (harness_stopped) continue;
        result.val_history.push_back(ev.val_iou);
        if (ev.val_iou > best) {
            best = ev.val_iou;
            since_best = 0;
        } else if (++since_best >= request.config.patience) {
            harness_stopped = true;
        }
    }
    const int status = child.wait(deadline);
    if (!done) throw ProtocolError(fmt::format("trainer exited (status {}) before the done event", status));
    if (status != 0) throw ProtocolError(fmt::format("trainer exited with status {}", status));
    if (done->best_epoch > static_cast<int>(result.val_history.size()))
        throw ProtocolError(fmt::format("best_epoch {} is past the {} epochs accepted by the harness", done->best_epoch,
                                        result.val_history.size()));
    result.test_perf = done->test_iou;
    result.best_epoch = done->best_epoch;
    return result;
}

int serve_builtin(std::istream& in, std::ostream& out, std::ostream& err) {
    try {
        std::string line;
        if (!std::getline(in, line)) throw ProtocolError("no request line on stdin");
        const auto req = parse_request(line);
        const auto train = read_manifest(req.train);
        const auto val = read_manifest(req.val);
        const auto test = read_manifest(req.test);
        const auto result = train_from_manifests(train, val, test, req.config, [&out](int epoch, double val_iou) {
            out << format_epoch_event(epoch, val_iou) << '\n' << std::flush;
        });
        out << format_done_event(result.test_perf, result.best_epoch) << '\n' << std::flush;
        return 0;
    } catch (const std::exception& ex) {
        err << "labelbudget-trainer: " << ex.what() << '\n';
        return 1;
    }
}

}  // namespace labelbudget
