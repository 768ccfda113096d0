#pragma once

#include "drsafe/bellman.hpp"
#include "drsafe/model.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace drsafe {

/// Thresholded sets S_{alpha,t} = {x : v_t(x) >= alpha}, stored as node masks.
class SafeSetFamily {
public:
    SafeSetFamily(double alpha, std::shared_ptr<const StateGrid> grid,
                  std::vector<std::vector<std::uint8_t>> masks);

    double alpha() const { return alpha_; }
    std::size_t stages() const { return masks_.size(); }
    const StateGrid& grid() const { return *grid_; }
    const std::vector<std::uint8_t>& mask(std::size_t t) const { return masks_[t]; }
    bool node_member(std::size_t t, std::size_t flat) const { return masks_[t][flat] != 0; }

    /// Conservative membership: x is a member iff every vertex of the grid cell
    /// containing x is a member (only the node itself when x sits on a node).
    bool contains(std::size_t t, const Vector& x) const;

private:
    double alpha_;
    std::shared_ptr<const StateGrid> grid_;
    std::vector<std::vector<std::uint8_t>> masks_;
};

/// Throws ConfigurationError unless alpha is in (0, 1].
SafeSetFamily threshold(const std::vector<ValueFunction>& values, double alpha);

/// Control used when every successor stays in the next safe set.
class FallbackPolicy {
public:
    /// The same control index everywhere (e.g. OFF).
    static FallbackPolicy constant(std::size_t control_index);
    /// Per-stage node tables of control indices on the value grid.
    static FallbackPolicy table(std::vector<std::vector<std::int32_t>> tables);

    std::size_t control(std::size_t t, std::size_t nearest_node) const;

private:
    std::size_t constant_ = 0;
    std::vector<std::vector<std::int32_t>> tables_;
};

enum class Branch : std::uint8_t { Fallback, Safe };

struct Action {
    std::size_t control = 0;
    Branch branch = Branch::Safe;
};

/// Safety-oriented controller: any (fallback) control while every admissible
/// control and every disturbance keep the successor inside the next safe set,
/// the robust safe policy otherwise.
class SafetyOrientedController {
public:
    SafetyOrientedController(std::shared_ptr<const Model> model, SafeSetFamily sets,
                             std::vector<std::vector<std::int32_t>> safe_policy,
                             FallbackPolicy fallback, std::vector<Box> supports);

    const Model& model() const { return *model_; }
    const SafeSetFamily& sets() const { return sets_; }
    std::size_t horizon() const { return safe_policy_.size(); }
    const Box& support(std::size_t t) const {
        return supports_.size() == 1 ? supports_.front() : supports_[t];
    }

    /// Nearest grid node, ties resolved toward lower coordinates.
    std::size_t nearest_node(const Vector& x) const;

    /// True iff f(x, u, w) lies in S_{alpha,t+1} for every admissible u and every
    /// w among the corners and per-dimension midpoints of W_t.
    bool all_safe_next(const Vector& x, std::size_t t) const;

    Action act(const Vector& x, std::size_t t) const;
    std::size_t safe_control(const Vector& x, std::size_t t) const;

private:
    std::shared_ptr<const Model> model_;
    SafeSetFamily sets_;
    std::vector<std::vector<std::int32_t>> safe_policy_;
    FallbackPolicy fallback_;
    std::vector<Box> supports_;
    std::vector<std::vector<Vector>> probes_;
};

} // namespace drsafe
