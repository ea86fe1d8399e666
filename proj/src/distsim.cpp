#include "kbcd/distsim.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "kbcd/error.hpp"

namespace kbcd {

std::string to_string(Method method) {
  switch (method) {
    case Method::full: return "full";
    case Method::nystrom: return "nystrom";
    case Method::rf: return "rf";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "full") return Method::full;
  if (name == "nystrom") return Method::nystrom;
  if (name == "rf") return Method::rf;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::generation: return "generation";
    case Phase::gram: return "gram";
    case Phase::residual: return "residual";
    case Phase::solve: return "solve";
  }
  return "?";
}

Partition::Partition(std::size_t n, std::size_t workers) : n_(n) {
  if (workers == 0) throw std::invalid_argument("Partition: need at least one worker");
  const std::size_t base = n / workers, extra = n % workers;
  std::size_t start = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t len = base + (w < extra ? 1 : 0);
    ranges_.emplace_back(start, start + len);
    start += len;
  }
}

std::size_t Partition::tree_depth() const noexcept {
  std::size_t depth = 0;
  while ((std::size_t{1} << depth) < ranges_.size()) ++depth;
  return depth;
}

void CostLedger::begin_block(std::size_t epoch, std::size_t block) {
  epoch_ = epoch;
  block_ = block;
  block_start_ = records_.size();
  ++blocks_;
}

PhaseRecord& CostLedger::slot(Phase phase) {
  for (std::size_t i = block_start_; i < records_.size(); ++i)
    if (records_[i].phase == phase) return records_[i];
  PhaseRecord rec;
  rec.epoch = epoch_;
  rec.block = block_;
  rec.phase = phase;
  records_.push_back(rec);
  return records_.back();
}

void CostLedger::charge(Phase phase, std::uint64_t flops, std::uint64_t bytes, double seconds) {
  PhaseRecord& rec = slot(phase);
  rec.flops += flops;
  rec.bytes += bytes;
  rec.seconds += seconds;
}

std::uint64_t CostLedger::flops() const noexcept {
  std::uint64_t s = 0;
  for (const auto& r : records_) s += r.flops;
  return s;
}

std::uint64_t CostLedger::bytes() const noexcept {
  std::uint64_t s = 0;
  for (const auto& r : records_) s += r.bytes;
  return s;
}

std::uint64_t CostLedger::flops(Phase phase) const noexcept {
  std::uint64_t s = 0;
  for (const auto& r : records_)
    if (r.phase == phase) s += r.flops;
  return s;
}

std::uint64_t CostLedger::bytes(Phase phase) const noexcept {
  std::uint64_t s = 0;
  for (const auto& r : records_)
    if (r.phase == phase) s += r.bytes;
  return s;
}

double CostLedger::seconds(Phase phase) const noexcept {
  double s = 0.0;
  for (const auto& r : records_)
    if (r.phase == phase) s += r.seconds;
  return s;
}

void CostLedger::write_csv(std::ostream& out, bool timing) const {
  out << "epoch,block,phase,flops,bytes,seconds\n";
  for (const auto& r : records_) {
    out << r.epoch << ',' << r.block << ',' << to_string(r.phase) << ',' << r.flops << ','
        << r.bytes << ',' << std::setprecision(9) << (timing ? r.seconds : 0.0) << '\n';
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Pairwise sums at strides 1, 2, 4, ...; partial 0 ends up holding the total.
void tree_reduce(std::vector<Matrix>& partials) {
  for (std::size_t stride = 1; stride < partials.size(); stride *= 2)
    for (std::size_t w = 0; w + stride < partials.size(); w += 2 * stride)
      partials[w] += partials[w + stride];
}

template <class PartialFn>
Matrix reduce_over_workers(const Partition& part, std::size_t rows_out, std::size_t cols_out,
                           Aggregation order, PartialFn partial) {
  const std::size_t m = part.workers();
  if (order == Aggregation::fixed_tree) {
    std::vector<Matrix> partials(m);
#pragma omp parallel for schedule(dynamic, 1) if (m > 1)
    for (std::size_t w = 0; w < m; ++w) {
      const auto [lo, hi] = part.range(w);
      partials[w] = partial(lo, hi);
    }
    tree_reduce(partials);
    return std::move(partials.front());
  }
  Matrix total(rows_out, cols_out);
#pragma omp parallel for schedule(dynamic, 1) if (m > 1)
  for (std::size_t w = 0; w < m; ++w) {
    const auto [lo, hi] = part.range(w);
    Matrix piece = partial(lo, hi);
#pragma omp critical(kbcd_arrival_reduce)
    total += piece;
  }
  return total;
}

}  // namespace

Matrix distributed_gram(const Matrix& zb, const Partition& part, CostLedger* ledger,
                        Aggregation order) {
  if (part.rows() != zb.rows()) throw DimensionMismatch("distributed_gram: partition rows");
  const auto start = Clock::now();
  const std::size_t b = zb.cols();
  Matrix g = reduce_over_workers(part, b, b, order, [&](std::size_t lo, std::size_t hi) {
    return gram_rows(zb, lo, hi);
  });
  if (ledger) {
    ledger->charge(Phase::gram, static_cast<std::uint64_t>(zb.rows()) * b * b,
                   static_cast<std::uint64_t>(part.tree_depth()) * b * b * sizeof(double),
                   seconds_since(start));
  }
  return g;
}

Matrix distributed_matvec(const Matrix& a, const Matrix& rhs, const Partition& part,
                          CostLedger* ledger, Phase phase, Aggregation order) {
  if (a.rows() != rhs.rows() || part.rows() != a.rows())
    throw DimensionMismatch("distributed_matvec: row counts");
  const auto start = Clock::now();
  const std::size_t b = a.cols(), k = rhs.cols();
  Matrix out = reduce_over_workers(part, b, k, order, [&](std::size_t lo, std::size_t hi) {
    return multiply_at_b_rows(a, rhs, lo, hi);
  });
  if (ledger) {
    ledger->charge(phase, static_cast<std::uint64_t>(a.rows()) * b * k, 0, seconds_since(start));
    ledger->charge_aux_bytes(static_cast<std::uint64_t>(part.tree_depth()) * b * k *
                             sizeof(double));
  }
  return out;
}

CostPrediction predict_costs(Method method, std::size_t n, std::size_t p, std::size_t b,
                             std::size_t k, std::size_t workers) {
  if (n == 0 || b == 0 || k == 0 || workers == 0 || (method != Method::full && p == 0))
    throw std::invalid_argument("predict_costs: parameters must be positive");
  const double nd = static_cast<double>(n), bd = static_cast<double>(b),
               kd = static_cast<double>(k), md = static_cast<double>(workers);
  const std::size_t depth = Partition(1, workers).tree_depth();
  CostPrediction c;
  c.residual_term = nd * bd * kd / md;
  c.solve_term = bd * bd * bd;
  if (method == Method::full) {
    c.blocks = n / b;
    c.bytes = static_cast<std::uint64_t>(b) * b * sizeof(double) * c.blocks;
  } else {
    c.gram_term = nd * bd * bd / md;
    c.blocks = p / b;
    c.bytes = static_cast<std::uint64_t>(depth) * b * b * sizeof(double) * c.blocks;
  }
  c.flops = (c.residual_term + c.gram_term + c.solve_term) * static_cast<double>(c.blocks);
  return c;
}

void CostReport::write_csv(std::ostream& out) const {
  out << "category,measured,predicted,ratio\n";
  out << std::setprecision(12);
  for (const auto& r : rows)
    out << r.category << ',' << r.measured << ',' << r.predicted << ',' << r.ratio << '\n';
  out << "bytes," << measured_bytes << ',' << predicted_bytes << ','
      << (predicted_bytes ? static_cast<double>(measured_bytes) / predicted_bytes
                          : (measured_bytes == 0 ? 1.0 : 0.0))
      << '\n';
}

CostReport measured_vs_predicted(const CostLedger& ledger, const CostPrediction& prediction,
                                 std::size_t workers, std::size_t epochs) {
  CostReport report;
  const double m = static_cast<double>(workers);
  const double e = static_cast<double>(epochs == 0 ? 1 : epochs);
  const double blocks = static_cast<double>(prediction.blocks);
  auto add = [&](const std::string& name, double measured, double predicted_term) {
    CostComparison c;
    c.category = name;
    c.measured = measured / e;
    c.predicted = predicted_term * blocks;
    c.ratio = c.predicted > 0.0 ? c.measured / c.predicted : 0.0;
    report.rows.push_back(c);
  };
  add("residual", static_cast<double>(ledger.flops(Phase::residual)) / m, prediction.residual_term);
  if (prediction.gram_term > 0.0 || ledger.flops(Phase::gram) > 0)
    add("gram", static_cast<double>(ledger.flops(Phase::gram)) / m, prediction.gram_term);
  add("solve", static_cast<double>(ledger.flops(Phase::solve)), prediction.solve_term);

  const CostComparison* dom = nullptr;
  for (const auto& r : report.rows)
    if (!dom || r.predicted > dom->predicted) dom = &r;
  if (dom) {
    report.dominant = dom->category;
    report.dominant_ratio = dom->ratio;
  }
  report.measured_bytes = ledger.bytes() / (epochs == 0 ? 1 : epochs);
  report.predicted_bytes = prediction.bytes;
  report.bytes_match = ledger.bytes() == prediction.bytes * epochs;
  return report;
}

}  // namespace kbcd
