#pragma once

#include <stdexcept>
#include <vector>

#include "smspde/grid.hpp"

namespace smspde {

enum class ControlMode { pointwise, xfree, constant };

/// Harvesting-rate control, evaluated left-point in time. Pointwise mode
/// stores one Field per time node; x-free mode one scalar per time node;
/// constant mode a single scalar.
class ControlField {
public:
    static ControlField constant_control(const Grid& grid, int steps, double T, double value);
    static ControlField xfree(const Grid& grid, int steps, double T, std::vector<double> values);
    static ControlField pointwise(const Grid& grid, int steps, double T,
                                  std::vector<Field> fields);

    ControlMode mode() const { return mode_; }
    const Grid& grid() const { return *grid_; }
    int steps() const { return steps_; }
    double T() const { return T_; }

    double at(int m, int node) const {
        switch (mode_) {
            case ControlMode::constant: return scalars_[0];
            case ControlMode::xfree: return scalars_[static_cast<std::size_t>(m)];
            default: return fields_[static_cast<std::size_t>(m)][node];
        }
    }

    void set(int m, int node, double v);
    double constant_value() const { return scalars_.at(0); }
    std::vector<double>& scalars() { return scalars_; }
    const std::vector<double>& scalars() const { return scalars_; }
    std::vector<Field>& fields() { return fields_; }
    const std::vector<Field>& fields() const { return fields_; }

    /// this + c * other (same mode and shape).
    ControlField axpy(double c, const ControlField& other) const;
    /// (1 - w) * this + w * other.
    ControlField blend(double w, const ControlField& other) const;
    /// Componentwise projection into [lo, hi].
    void clamp(double lo, double hi);
    /// Largest absolute componentwise difference.
    double max_diff(const ControlField& other) const;

private:
    ControlMode mode_ = ControlMode::constant;
    const Grid* grid_ = nullptr;
    int steps_ = 0;
    double T_ = 0.0;
    std::vector<Field> fields_;
    std::vector<double> scalars_;
};

}  // namespace smspde
