#include <doctest.h>

#include "labelbudget/effort_model.hpp"
#include "labelbudget/error.hpp"
#include "labelbudget/virtue_transforms.hpp"
#include "test_util.hpp"

using namespace labelbudget;

TEST_CASE("effort_qd") {
    CHECK(effort_qd(0.1, 80) == 0.08);
    CHECK(effort_qd(1.0, 100) == 1.0);
    CHECK(effort_qd(0.5, 0) == 0.0);
    CHECK_THROWS_AS((void)effort_qd(0.0, 50), DomainError);
    CHECK_THROWS_AS((void)effort_qd(0.5, 101), DomainError);
}

TEST_CASE("effort_dc") {
    CHECK(effort_dc(0.6, 0.1) == 0.06);
    CHECK(effort_dc(1.0, 1.0) == 1.0);
    CHECK(effort_dc(0.25, 0.5) == 0.125);
    CHECK_THROWS_AS((void)effort_dc(0.5, 0.0), DomainError);
    CHECK_THROWS_AS((void)effort_dc(1.2, 0.5), DomainError);
}

TEST_CASE("effort_dc equals the labeled slice ratio of the transformed manifest") {
    const auto m = testutil::toy_manifest(8, 10);
    const auto t = sample_completeness(sample_diversity(m, 0.25, 1), 0.5, 2);
    const double ratio = static_cast<double>(t.labeled_slice_count()) / static_cast<double>(m.labeled_slice_count());
    CHECK(ratio == effort_dc(0.25, 0.5));
}

TEST_CASE("axis names") {
    CHECK(effort_axis_from_string("qd") == EffortAxis::quality_diversity);
    CHECK(effort_axis_from_string("diversity-completeness") == EffortAxis::diversity_completeness);
    CHECK(effort_axis_from_string(to_string(EffortAxis::quality_diversity)) == EffortAxis::quality_diversity);
    CHECK_THROWS_AS((void)effort_axis_from_string("xy"), DomainError);
    const auto p = effort_point(EffortAxis::diversity_completeness, {0.5, 0.5, 90});
    CHECK(p.effort == 0.25);
}
