#include "smspde/control_field.hpp"

#include <algorithm>
#include <cmath>

namespace smspde {

ControlField ControlField::constant_control(const Grid& grid, int steps, double T, double value) {
    ControlField c;
    c.mode_ = ControlMode::constant;
    c.grid_ = &grid;
    c.steps_ = steps;
    c.T_ = T;
    c.scalars_ = {value};
    return c;
}

ControlField ControlField::xfree(const Grid& grid, int steps, double T,
                                 std::vector<double> values) {
    if (static_cast<int>(values.size()) != steps + 1)
        throw std::invalid_argument("control: x-free mode needs steps+1 values");
    ControlField c;
    c.mode_ = ControlMode::xfree;
    c.grid_ = &grid;
    c.steps_ = steps;
    c.T_ = T;
    c.scalars_ = std::move(values);
    return c;
}

ControlField ControlField::pointwise(const Grid& grid, int steps, double T,
                                     std::vector<Field> fields) {
    if (static_cast<int>(fields.size()) != steps + 1)
        throw std::invalid_argument("control: pointwise mode needs steps+1 fields");
    ControlField c;
    c.mode_ = ControlMode::pointwise;
    c.grid_ = &grid;
    c.steps_ = steps;
    c.T_ = T;
    c.fields_ = std::move(fields);
    return c;
}

void ControlField::set(int m, int node, double v) {
    switch (mode_) {
        case ControlMode::constant: scalars_[0] = v; break;
        case ControlMode::xfree: scalars_[static_cast<std::size_t>(m)] = v; break;
        default: fields_[static_cast<std::size_t>(m)][node] = v; break;
    }
}

namespace {

void require_compatible(const ControlField& a, const ControlField& b) {
    if (a.mode() != b.mode() || a.steps() != b.steps())
        throw std::invalid_argument("control: incompatible modes/shapes");
}

}  // namespace

ControlField ControlField::axpy(double c, const ControlField& other) const {
    require_compatible(*this, other);
    ControlField out = *this;
    if (mode_ == ControlMode::pointwise) {
        for (std::size_t m = 0; m < fields_.size(); ++m)
            for (int n = 0; n < fields_[m].size(); ++n)
                out.fields_[m][n] += c * other.fields_[m][n];
    } else {
        for (std::size_t m = 0; m < scalars_.size(); ++m)
            out.scalars_[m] += c * other.scalars_[m];
    }
    return out;
}

ControlField ControlField::blend(double w, const ControlField& other) const {
    require_compatible(*this, other);
    ControlField out = *this;
    if (mode_ == ControlMode::pointwise) {
        for (std::size_t m = 0; m < fields_.size(); ++m)
            for (int n = 0; n < fields_[m].size(); ++n)
                out.fields_[m][n] = (1.0 - w) * fields_[m][n] + w * other.fields_[m][n];
    } else {
        for (std::size_t m = 0; m < scalars_.size(); ++m)
            out.scalars_[m] = (1.0 - w) * scalars_[m] + w * other.scalars_[m];
    }
    return out;
}

void ControlField::clamp(double lo, double hi) {
    if (mode_ == ControlMode::pointwise) {
        for (auto& f : fields_)
            for (int n = 0; n < f.size(); ++n) f[n] = std::clamp(f[n], lo, hi);
    } else {
        for (auto& v : scalars_) v = std::clamp(v, lo, hi);
    }
}

double ControlField::max_diff(const ControlField& other) const {
    require_compatible(*this, other);
    double d = 0.0;
    if (mode_ == ControlMode::pointwise) {
        for (std::size_t m = 0; m < fields_.size(); ++m)
            for (int n = 0; n < fields_[m].size(); ++n)
                d = std::max(d, std::abs(fields_[m][n] - other.fields_[m][n]));
    } else {
        for (std::size_t m = 0; m < scalars_.size(); ++m)
            d = std::max(d, std::abs(scalars_[m] - other.scalars_[m]));
    }
    return d;
}

}  // namespace smspde
