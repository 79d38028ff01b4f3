#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>

#include "labelbudget/trainer.hpp"

namespace labelbudget {

// Trainer wire protocol: newline-delimited JSON over the child's stdin/stdout.
//
//   harness -> trainer (one line)
//     {"cmd":"train","train":P,"val":P,"test":P,"seed":N,"max_epochs":N,"patience":N,"lr":X}
//   trainer -> harness
//     {"event":"epoch","epoch":N,"val_iou":X}      zero or more
//     {"event":"done","test_iou":X,"best_epoch":N}  exactly one, last
//
// Exit code 0 on success.

struct TrainRequest {
    std::filesystem::path train;
    std::filesystem::path val;
    std::filesystem::path test;
    TrainConfig config;
};

[[nodiscard]] std::string format_request(const TrainRequest& request);
[[nodiscard]] TrainRequest parse_request(std::string_view line);

struct TrainerEvent {
    enum class Kind { epoch, done };
    Kind kind = Kind::epoch;
    int epoch = 0;
    double val_iou = 0.0;
    double test_iou = 0.0;
    int best_epoch = 0;
};

[[nodiscard]] std::string format_epoch_event(int epoch, double val_iou);
[[nodiscard]] std::string format_done_event(double test_iou, int best_epoch);

/// Parses one trainer output line; ProtocolError names `line_number`.
[[nodiscard]] TrainerEvent parse_event(std::string_view line, std::size_t line_number);

struct ExternalOptions {
    std::chrono::milliseconds timeout = std::chrono::hours(1);
};

/// Launches `command` through /bin/sh, sends the request, and collects events.
/// Epoch events beyond the harness's own max_epochs/patience stopping point are
/// ignored. Throws ProtocolError on malformed lines, early exit, non-zero exit
/// status, or timeout; the child is killed in every failure case.
[[nodiscard]] RunResult run_external(const std::string& command, const TrainRequest& request,
                                     const ExternalOptions& options = {});

/// Serves one request on the given streams with the builtin learner; used by
/// the `labelbudget-trainer` executable.
int serve_builtin(std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace labelbudget
