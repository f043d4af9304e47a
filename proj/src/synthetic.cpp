#include "resume_judge/synthetic.hpp"

#include <array>
#include <random>
#include <string_view>

#include <nlohmann/json.hpp>

#include "resume_judge/corpus.hpp"
#include "resume_judge/random.hpp"

namespace resume_judge {

namespace {

template <std::size_t N>
std::string_view pick(std::mt19937_64& rng, const std::array<std::string_view, N>& bank) {
  return bank[uniform_index(rng, N)];
}

constexpr std::array<std::string_view, 6> kCompanies = {
    "companyA", "northwind", "sakura_trading", "bluepeak", "tsubasa_sys", "kiwami_foods"};

constexpr std::array<std::string_view, 6> kPositions = {
    "Software Engineer", "Sales", "Marketing Planner", "Data Analyst", "総合職", "技術職（研究開発）"};

constexpr std::array<std::string_view, 4> kQuestionsEn = {
    "Why do you want to join our company?",
    "Describe something you worked hard on as a student.",
    "Please describe your strengths.",
    "What do you want to achieve after joining?"};

constexpr std::array<std::string_view, 4> kQuestionsJa = {
    "志望動機を教えてください。", "学生時代に力を入れたことを教えてください。",
    "あなたの強みを教えてください。", "入社後に挑戦したいことを教えてください。"};

constexpr std::array<std::string_view, 12> kSentencesEn = {
    "My strength is persistence, which I built while leading a twelve-person robotics team.",
    "In my second year I reorganised our club's schedule and cut weekly meeting time by 30 percent.",
    "I want to contribute to your logistics platform because it supports small regional retailers.",
    "During my internship I analysed sales data for 400 stores and proposed a new restocking rule.",
    "I learned that listening to every member first makes a team decision faster in the end.",
    "I think I am a good person and I will try hard at everything.",
    "When our experiment failed three times, I rebuilt the measurement setup and documented each step.",
    "After joining, I hope to design services that make public transport easier for elderly people.",
    "I have experience at a part-time job and I did many things there.",
    "As a result, customer complaints at the cafe where I worked dropped from eight to two per month.",
    "I am interested in many industries so I applied to this company too.",
    "I volunteered as a tutor for two years and raised my students' average test score by 15 points."};

constexpr std::array<std::string_view, 10> kSentencesJa = {
    "私の強みは、課題を数値で把握し改善を続ける粘り強さです。",
    "大学では十二名のロボット研究会で代表を務め、大会で準優勝しました。",
    "アルバイト先の飲食店で、待ち時間を平均五分短縮する仕組みを提案しました。",
    "貴社の地域に根ざした物流サービスに共感し、志望しました。",
    "色々な経験をしてきたので、何でも頑張れると思います。",
    "失敗の原因を記録し、メンバー全員で共有することで再発を防ぎました。",
    "入社後は、データ分析を通じて新しい商品企画に貢献したいと考えています。",
    "いろいろな会社を見ていて、なんとなく良さそうだと思いました。",
    "留学先では現地の学生と共同研究を行い、論文を一本発表しました。",
    "結論として、私は周囲を巻き込みながら目標を達成する力があります。"};

constexpr std::array<std::string_view, 4> kBoilerplateQuestions = {
    "Submission deadline", "Submission method", "提出期限", "Word limit"};

constexpr std::array<std::string_view, 4> kBoilerplateAnswers = {
    "June 30, 23:59 via the web form.", "Upload a PDF on the recruiting site.",
    "6月30日正午まで", "400 characters"};

std::string make_answer(std::mt19937_64& rng, bool japanese) {
  const std::size_t target = 110 + uniform_index(rng, 300);
  std::string answer;
  while (utf8_length(answer) <= target) {
    if (!answer.empty() && !japanese) answer += ' ';
    answer += japanese ? pick(rng, kSentencesJa) : pick(rng, kSentencesEn);
  }
  return answer;
}

}  // namespace

std::vector<std::string> generate_synthetic_corpus(std::size_t n_records, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> lines;
  lines.reserve(n_records);
  for (std::size_t i = 0; i < n_records; ++i) {
    const bool japanese = uniform_index(rng, 3) == 0;
    nlohmann::json content = nlohmann::json::array();
    const std::size_t n_items = 3 + uniform_index(rng, 3);
    const auto& questions = japanese ? kQuestionsJa : kQuestionsEn;
    for (std::size_t k = 0; k < n_items; ++k) {
      content.push_back({{"question", questions[k % questions.size()]},
                         {"answer", make_answer(rng, japanese)}});
    }
    const std::size_t n_boiler = 1 + uniform_index(rng, 2);
    for (std::size_t k = 0; k < n_boiler; ++k) {
      content.push_back({{"question", pick(rng, kBoilerplateQuestions)},
                         {"answer", pick(rng, kBoilerplateAnswers)}});
    }
    const nlohmann::json record = {
        {"id", std::string(pick(rng, kCompanies)) + "_resume" + std::to_string(i + 1) + ".txt"},
        {"applied_position", pick(rng, kPositions)},
        {"content", content},
        {"university", "Example University"},
        {"faculty", "Faculty of Engineering"},
        {"graduation_year", 2026}};
    lines.push_back(record.dump());
  }
  return lines;
}

}  // namespace resume_judge
