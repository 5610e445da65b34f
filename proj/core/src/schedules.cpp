#include "curricle/schedules.hpp"

#include <cmath>
#include <stdexcept>

namespace curricle {

CurveKind parse_curve_kind(const std::string& name) {
  if (name == "linear") return CurveKind::Linear;
  if (name == "scurve") return CurveKind::SCurve;
  if (name == "exp_increase") return CurveKind::ExpIncrease;
  if (name == "static") return CurveKind::Static;
  throw std::invalid_argument("unknown curve kind: " + name);
}

const char* curve_kind_name(CurveKind kind) {
  switch (kind) {
    case CurveKind::Linear: return "linear";
    case CurveKind::SCurve: return "scurve";
    case CurveKind::ExpIncrease: return "exp_increase";
    case CurveKind::Static: return "static";
  }
  return "?";
}

double curve(CurveKind kind, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::out_of_range("curve progress outside [0, 1]");
  switch (kind) {
    case CurveKind::Linear:
      return x;
    case CurveKind::SCurve:
      return 0.5 * (1.0 + std::sin(M_PI * x - M_PI / 2.0));
    case CurveKind::ExpIncrease: {
      const double c = 2.0 / (std::exp(10.0) + 1.0);
      return c + (1.0 - c) * std::expm1(10.0 * x) / std::expm1(10.0);
    }
    case CurveKind::Static:
      return 1.0;
  }
  throw std::logic_error("unhandled curve kind");
}

double normalized_progress(int epoch, int total_epochs) {
  if (total_epochs < 1) throw std::out_of_range("total_epochs must be >= 1");
  if (epoch < 0 || epoch > total_epochs) throw std::out_of_range("epoch outside [0, total_epochs]");
  return static_cast<double>(epoch) / static_cast<double>(total_epochs);
}

void validate_schedule(const ScheduleSpec& spec, const std::string& prefix) {
  auto bad = [&](const std::string& field, const std::string& why) {
    throw std::invalid_argument(prefix + "." + field + " " + why);
  };
  if (!(spec.start >= 0.0 && spec.start <= 1.0)) bad("start", "must lie in [0, 1]");
  if (!(spec.end >= 0.0 && spec.end <= 1.0)) bad("end", "must lie in [0, 1]");
  if (spec.start > spec.end) bad("start", "must not exceed " + prefix + ".end");
  if (spec.total_epochs < 1) bad("total_epochs", "must be >= 1");
}

double rate(const ScheduleSpec& spec, int epoch) {
  const double x = normalized_progress(epoch, spec.total_epochs);
  return spec.start + (spec.end - spec.start) * curve(spec.kind, x);
}

}  // namespace curricle
