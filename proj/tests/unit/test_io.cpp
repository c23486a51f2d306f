#include <doctest.h>

#include <bit>
#include <cmath>

#include "fixtures.hpp"
#include "npb/errors.hpp"
#include "npb/io.hpp"

using namespace npb;
using namespace fixtures;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("model JSON round trip is bit exact") {
    const auto m = curved_model(LinkKind::logit, LinkKind::cloglog, 0.123456789012345678, true);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Random(m.parameter_count(), m.parameter_count());
    cov = (cov * cov.transpose()).eval() / 3.0;
    StoredModel s{m, cov, -1234.56789012345, 500};
    const auto back = model_from_json(model_to_json(s));
    CHECK(same_bits(back.model.parameters(), m.parameters()));
    CHECK(back.model.parameter_names() == m.parameter_names());
    CHECK(back.model.covariate_names() == m.covariate_names());
    CHECK(back.model.margin_t().transform.basis().log_scale());
    CHECK(back.model.margin_y().link.kind == LinkKind::logit);
    CHECK(back.model.dependence().form == Dependence::Form::covariate);
    CHECK(back.covariance == cov);
    CHECK(*back.loglik == -1234.56789012345);
    CHECK(back.n == 500);
    // Serializing again gives the same text.
    CHECK(model_to_json(back) == model_to_json(s));
  }

  TEST_CASE("model without covariance") {
    StoredModel s{identity_model(0.3), {}, std::nullopt, 0};
    const auto back = model_from_json(model_to_json(s));
    CHECK_FALSE(back.has_covariance());
    CHECK_FALSE(back.loglik.has_value());
  }

  TEST_CASE("reader rejects unknown major versions and foreign documents") {
    StoredModel s{identity_model(0.3), {}, std::nullopt, 0};
    std::string text = model_to_json(s);
    const auto pos = text.find("\"1.0\"");
    REQUIRE(pos != std::string::npos);
    std::string v2 = text;
    v2.replace(pos, 5, "\"2.0\"");
    CHECK_THROWS_AS(model_from_json(v2), SchemaError);
    std::string v11 = text;
    v11.replace(pos, 5, "\"1.7\"");
    CHECK_NOTHROW(model_from_json(v11));
    CHECK_THROWS_AS(model_from_json("{\"format\": \"other\"}"), SchemaError);
    CHECK_THROWS_AS(model_from_json("not json"), SchemaError);
  }

  TEST_CASE("CSV interval schema with Inf literals") {
    const auto t = parse_observations_csv(
        "y_lower,y_upper,t_lower,t_upper,age\n"
        "1.5,1.5,2,2,40\n"
        "-Inf,0.3,1,Inf,51\n"
        "0.2,0.4,1.5,3.5,60\r\n");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.covariate_names == std::vector<std::string>{"age"});
    CHECK(t.rows[0].y_exact());
    CHECK(t.rows[0].t_exact());
    CHECK(std::isinf(t.rows[1].y_lower));
    CHECK(t.rows[1].right_censored());
    CHECK(t.rows[2].t_upper == 3.5);
    CHECK(t.rows[2].x[0] == 60.0);
  }

  TEST_CASE("CSV shorthand columns are normalized") {
    const auto t = parse_observations_csv("t,status,y,z\n3,1,0.5,1\n4,0,0.7,2\n");
    CHECK(t.rows[0].t_lower == 3.0);
    CHECK(t.rows[0].t_upper == 3.0);
    CHECK(t.rows[1].right_censored());
    CHECK(t.rows[1].y_lower == 0.7);
    CHECK(t.covariate_names == std::vector<std::string>{"z"});
  }

  TEST_CASE("CSV errors name the row and column") {
    auto message = [](const std::string& text) {
      try {
        parse_observations_csv(text);
      } catch (const SchemaError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    const std::string h = "y_lower,y_upper,t_lower,t_upper,a\n";
    CHECK(message(h + "1,1,2,2,0\n1,1,3,2,0\n").find("row 2") != std::string::npos);
    CHECK(message(h + "1,1,3,2,0\n").find("t_lower > t_upper") != std::string::npos);
    const auto missing = message(h + "1,1,2,2,0\n1,1,2,2,\n");
    CHECK(missing.find("row 2") != std::string::npos);
    CHECK(missing.find("'a'") != std::string::npos);
    CHECK(message(h + "1,1,x,2,0\n").find("column 't_lower'") != std::string::npos);
    CHECK(message("y,t\n1,2\n").find("status") != std::string::npos);
    CHECK(message("t,status,y\n1,2,3\n").find("status") != std::string::npos);
    CHECK_FALSE(message(h).empty());
  }

  TEST_CASE("select_covariates reorders and reports missing columns") {
    const auto t = parse_observations_csv("y,t,status,b,a\n1,2,1,10,20\n");
    const auto rows = select_covariates(t, {"a", "b"});
    CHECK(rows[0].x == std::vector<double>{20.0, 10.0});
    CHECK_THROWS_AS(select_covariates(t, {"c"}), SchemaError);
  }

  TEST_CASE("CSV writer round trip") {
    const auto m = curved_model(LinkKind::probit, LinkKind::logit, 0.2);
    const auto data = censor_mixed(sample(m, 40, 3));
    const auto back = parse_observations_csv(observations_to_csv(data, {"x1", "x2"}));
    REQUIRE(back.rows.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(same_bits({back.rows[i].y_lower, back.rows[i].y_upper, back.rows[i].t_lower, back.rows[i].t_upper},
                      {data[i].y_lower, data[i].y_upper, data[i].t_lower, data[i].t_upper}));
      CHECK(same_bits(back.rows[i].x, data[i].x));
    }
  }

  TEST_CASE("number formatting") {
    CHECK(format_double(kInf) == "Inf");
    CHECK(format_double(-kInf) == "-Inf");
    CHECK(parse_double("-inf") == -kInf);
    CHECK(parse_double(format_double(0.1)) == 0.1);
    CHECK_THROWS(parse_double("1.2.3"));
  }
}
