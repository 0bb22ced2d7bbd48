#pragma once

#include <span>

namespace nrelaggs {

/// Fraction of positions where the labels agree. Throws LengthMismatch, and
/// InvalidArgument on empty input.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Mann-Whitney AUROC, ties count one half: (2 wins + ties) / (2 P N) from
/// exact integer pair counts. Labels are +1 (positive) and -1. Throws
/// LengthMismatch, LabelDomain, SingleClass.
double auroc(std::span<const double> scores, std::span<const int> labels);
double auroc(std::span<const float> scores, std::span<const int> labels);

}  // namespace nrelaggs
