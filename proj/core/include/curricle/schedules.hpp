#pragma once

#include <string>

namespace curricle {

enum class CurveKind { Linear, SCurve, ExpIncrease, Static };

// Throws std::invalid_argument on an unknown name.
CurveKind parse_curve_kind(const std::string& name);
const char* curve_kind_name(CurveKind kind);

// Curriculum curve on normalized progress x in [0, 1]. Every kind maps into
// [0, 1] and is non-decreasing. Static is identically 1, so a static schedule
// sits at its end value from the first epoch. ExpIncrease is anchored at
// curve(0) = 2/(e^10 + 1) and curve(1) = 1 and stays below 1% until past the
// midpoint.
double curve(CurveKind kind, double x);

// epoch / total_epochs, range-checked.
double normalized_progress(int epoch, int total_epochs);

struct ScheduleSpec {
  CurveKind kind = CurveKind::Linear;
  double start = 0.0;
  double end = 0.0;
  int total_epochs = 1;
};

// Throws std::invalid_argument naming `prefix` when the spec is malformed:
// rates must lie in [0, 1], start must not exceed end, epochs must be >= 1.
void validate_schedule(const ScheduleSpec& spec, const std::string& prefix);

// start + (end - start) * curve(kind, epoch / total_epochs).
double rate(const ScheduleSpec& spec, int epoch);

// Per-epoch replacement rates: epsilon feeds back model predictions, gamma
// substitutes sampled neighbors.
struct RatePair {
  double epsilon = 0.0;
  double gamma = 0.0;
};

}  // namespace curricle
