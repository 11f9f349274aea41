//! Synthetic intent corpus: per-class templates with `{slot}` placeholders,
//! expanded with seeded filler choices and wrapped in shared carrier
//! phrases ("hey kasper ...", "... please").

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::intent::{Dataset, Example, IntentClass};

pub const DEFAULT_CORPUS_SEED: u64 = 42;
pub const DEFAULT_PER_CLASS: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("class {0} has no templates")]
    ClassWithoutTemplates(IntentClass),
    #[error("template {template:?} uses unknown slot {{{slot}}}")]
    UnknownSlot { template: String, slot: String },
    #[error("examples per class must be positive")]
    ZeroPerClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub templates: BTreeMap<IntentClass, Vec<String>>,
    pub slots: BTreeMap<String, Vec<String>>,
    pub prefixes: Vec<String>,
    pub suffixes: Vec<String>,
    pub seed: u64,
    pub per_class: usize,
}

fn owned(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| (*s).to_owned()).collect()
}

impl Default for CorpusSpec {
    fn default() -> Self {
        use IntentClass::*;
        let templates: [(IntentClass, &[&str]); 22] = [
            (
                ArtAndBeauty,
                &[
                    "show me paintings by {artist}",
                    "give me a {beauty} tip",
                    "what is a good {beauty} routine",
                    "find art galleries near {place}",
                    "tell me about the artist {artist}",
                ],
            ),
            (
                BusinessAndFinance,
                &[
                    "what is the stock price of {company}",
                    "how is the {market} doing",
                    "convert {amount} dollars to {currency}",
                    "should i invest in {company}",
                    "how much is my portfolio worth",
                ],
            ),
            (
                Communication,
                &[
                    "send a message to {person} saying {msg}",
                    "call {person}",
                    "text {person} that {msg}",
                    "read my new messages from {person}",
                    "email {person} about the meeting",
                ],
            ),
            (
                ConnectedCar,
                &[
                    "start my {vehicle}",
                    "lock the {vehicle} doors",
                    "how much fuel is left in my {vehicle}",
                    "set the {vehicle} temperature to {number} degrees",
                    "is my {vehicle} charged",
                ],
            ),
            (
                FoodAndDrink,
                &[
                    "find a recipe for {dish}",
                    "how do i make {dish}",
                    "order {dish} from {restaurant}",
                    "what wine goes with {dish}",
                    "what can i cook with {ingredient}",
                ],
            ),
            (
                GamesTriviaAndAccessories,
                &[
                    "let's play {game}",
                    "ask me a trivia question about {topic}",
                    "start a game of {game}",
                    "give me a riddle about {topic}",
                    "quiz me on {topic}",
                ],
            ),
            (
                HealthAndFitness,
                &[
                    "start a {workout} workout",
                    "how many calories are in {dish}",
                    "log {number} minutes of {exercise}",
                    "remind me to take my {medicine}",
                    "how many steps did i walk {day}",
                ],
            ),
            (
                Interests,
                &[
                    "tell me more about {hobby}",
                    "find a {hobby} club near {place}",
                    "what are some good {hobby} ideas",
                    "i am interested in {hobby}",
                    "how do i get started with {hobby}",
                ],
            ),
            (
                Knowledge,
                &[
                    "who is {famous}",
                    "what is the capital of {country}",
                    "how tall is {landmark}",
                    "define the word {word}",
                    "when was {famous} born",
                ],
            ),
            (
                Lifestyle,
                &[
                    "give me some {life} advice",
                    "how can i be more {trait}",
                    "suggest an outfit for {occasion}",
                    "what should i wear to {occasion}",
                    "how do i keep my home {trait}",
                ],
            ),
            (
                MoviesAndTvShows,
                &[
                    "what movies are playing near {place}",
                    "show me the trailer for {film}",
                    "when does the next season of {show} come out",
                    "recommend a {genre} movie",
                    "who stars in {film}",
                ],
            ),
            (
                MusicAndAudio,
                &[
                    "play {singer}",
                    "play some {music_genre} music",
                    "turn up the volume on {singer}",
                    "play the song {song}",
                    "play a podcast about {topic}",
                ],
            ),
            (
                News,
                &[
                    "what are the latest headlines",
                    "give me the news about {news_topic}",
                    "what is happening in {country}",
                    "read me the {news_source} news",
                    "any breaking news on {news_topic}",
                ],
            ),
            (
                NoveltyAndHumour,
                &[
                    "tell me a joke",
                    "tell me a joke about {topic}",
                    "say something funny about {person}",
                    "do you know any {humour} jokes",
                    "make me laugh {day}",
                ],
            ),
            (
                ProblemSolving,
                &[
                    "what is {number} times {number}",
                    "solve {equation}",
                    "how many {unit} are in a {unit2}",
                    "what is the square root of {number}",
                    "help me fix my {broken}",
                ],
            ),
            (
                Productivity,
                &[
                    "set a reminder to {task} at {time}",
                    "add {task} to my to do list",
                    "schedule a meeting with {person} at {time}",
                    "set an alarm for {time}",
                    "what is on my calendar {day}",
                ],
            ),
            (
                Shopping,
                &[
                    "add {item} to my shopping list",
                    "order more {item}",
                    "where can i buy {item}",
                    "is there a sale on {item}",
                    "track my {store} order",
                ],
            ),
            (
                Social,
                &[
                    "post my {post} on {network}",
                    "what is new on {network}",
                    "who liked my {post}",
                    "share my {post} with {person}",
                    "any friend requests on {network}",
                ],
            ),
            (
                Sports,
                &[
                    "what was the score of the {team} game",
                    "when do the {team} play next",
                    "show me the {league} standings",
                    "who won the {event}",
                    "how did {athlete} do {day}",
                ],
            ),
            (
                TravelAndTransportation,
                &[
                    "book a flight to {city}",
                    "how long is the drive to {city}",
                    "when is the next {transit} to {city}",
                    "find a hotel in {city}",
                    "get me a ride to {place}",
                ],
            ),
            (
                Utilities,
                &[
                    "turn {switch} the {appliance}",
                    "set the thermostat to {number} degrees",
                    "dim the {room} lights",
                    "what is the battery level of my {device}",
                    "turn the {room} lights {switch}",
                ],
            ),
            (
                Weather,
                &[
                    "what is the weather in {city}",
                    "will it rain {day}",
                    "how hot will it be {day}",
                    "what is the forecast for {city}",
                    "do i need an umbrella {day}",
                    "is it going to snow in {city}",
                ],
            ),
        ];

        let slots: &[(&str, &[&str])] = &[
            (
                "person",
                &[
                    "mom", "dad", "john", "priya", "alex", "my boss", "sarah", "rahul",
                ],
            ),
            (
                "place",
                &[
                    "the airport",
                    "downtown",
                    "the mall",
                    "the office",
                    "the station",
                    "home",
                ],
            ),
            (
                "city",
                &[
                    "delhi", "mumbai", "london", "new york", "paris", "tokyo", "chicago",
                ],
            ),
            (
                "country",
                &["france", "japan", "india", "brazil", "canada", "kenya"],
            ),
            (
                "day",
                &[
                    "today",
                    "tomorrow",
                    "on monday",
                    "this weekend",
                    "on friday",
                    "tonight",
                ],
            ),
            (
                "time",
                &["six am", "noon", "five pm", "nine thirty", "midnight"],
            ),
            (
                "number",
                &[
                    "two", "five", "ten", "twelve", "twenty", "eighteen", "forty",
                ],
            ),
            (
                "topic",
                &[
                    "history",
                    "science",
                    "space",
                    "animals",
                    "geography",
                    "cats",
                ],
            ),
            (
                "artist",
                &[
                    "monet",
                    "picasso",
                    "van gogh",
                    "frida kahlo",
                    "rembrandt",
                    "da vinci",
                ],
            ),
            (
                "beauty",
                &[
                    "skincare",
                    "makeup",
                    "nail art",
                    "hair styling",
                    "eyeliner",
                    "lipstick",
                ],
            ),
            (
                "company",
                &["apple", "tesla", "amazon", "google", "microsoft", "netflix"],
            ),
            (
                "market",
                &[
                    "nasdaq",
                    "stock market",
                    "dow jones",
                    "bond market",
                    "crypto market",
                ],
            ),
            (
                "amount",
                &["ten", "fifty", "one hundred", "a thousand", "twenty"],
            ),
            ("currency", &["euros", "rupees", "yen", "pounds", "pesos"]),
            (
                "msg",
                &[
                    "i am running late",
                    "see you soon",
                    "call me back",
                    "happy birthday",
                    "on my way",
                ],
            ),
            ("vehicle", &["car", "suv", "truck", "sedan", "electric car"]),
            (
                "dish",
                &[
                    "pasta", "pizza", "biryani", "tacos", "pancakes", "sushi", "curry", "lasagna",
                ],
            ),
            (
                "restaurant",
                &["dominos", "the thai place", "subway", "the corner cafe"],
            ),
            (
                "ingredient",
                &["chicken", "rice", "eggs", "spinach", "lentils", "tofu"],
            ),
            (
                "game",
                &[
                    "twenty questions",
                    "chess",
                    "tic tac toe",
                    "hangman",
                    "a word game",
                ],
            ),
            ("workout", &["ten minute", "cardio", "yoga", "core", "hiit"]),
            (
                "exercise",
                &["running", "cycling", "swimming", "walking", "rowing"],
            ),
            (
                "medicine",
                &[
                    "vitamins",
                    "pills",
                    "medicine",
                    "inhaler",
                    "allergy tablets",
                ],
            ),
            (
                "hobby",
                &[
                    "gardening",
                    "photography",
                    "knitting",
                    "bird watching",
                    "astronomy",
                    "woodworking",
                    "pottery",
                ],
            ),
            (
                "famous",
                &[
                    "albert einstein",
                    "abraham lincoln",
                    "marie curie",
                    "gandhi",
                    "shakespeare",
                ],
            ),
            (
                "landmark",
                &[
                    "the eiffel tower",
                    "mount everest",
                    "the taj mahal",
                    "the empire state building",
                ],
            ),
            (
                "word",
                &[
                    "serendipity",
                    "ephemeral",
                    "ubiquitous",
                    "quixotic",
                    "laconic",
                ],
            ),
            (
                "life",
                &[
                    "dating",
                    "parenting",
                    "relationship",
                    "home decor",
                    "minimalism",
                ],
            ),
            (
                "trait",
                &["confident", "organized", "relaxed", "mindful", "tidy"],
            ),
            (
                "occasion",
                &[
                    "a wedding",
                    "a job interview",
                    "a party",
                    "a date",
                    "a funeral",
                ],
            ),
            (
                "film",
                &["inception", "the matrix", "titanic", "avatar", "dune"],
            ),
            (
                "show",
                &[
                    "friends",
                    "the office",
                    "stranger things",
                    "breaking bad",
                    "the crown",
                ],
            ),
            (
                "genre",
                &["comedy", "horror", "action", "romantic", "sci fi"],
            ),
            (
                "singer",
                &[
                    "taylor swift",
                    "the beatles",
                    "ar rahman",
                    "coldplay",
                    "drake",
                ],
            ),
            (
                "music_genre",
                &["jazz", "rock", "classical", "lofi", "hip hop"],
            ),
            (
                "song",
                &["yesterday", "bohemian rhapsody", "shape of you", "imagine"],
            ),
            (
                "news_topic",
                &[
                    "politics",
                    "the election",
                    "technology",
                    "the economy",
                    "climate change",
                ],
            ),
            ("news_source", &["bbc", "cnn", "local", "morning", "world"]),
            ("humour", &["dad", "knock knock", "pun", "nerdy", "silly"]),
            (
                "equation",
                &[
                    "x plus five equals ten",
                    "two x equals eight",
                    "three y minus one equals five",
                ],
            ),
            ("unit", &["inches", "grams", "ounces", "minutes", "meters"]),
            ("unit2", &["foot", "kilogram", "pound", "hour", "mile"]),
            ("broken", &["wifi", "printer", "laptop", "phone"]),
            (
                "task",
                &[
                    "call the bank",
                    "pay rent",
                    "buy groceries",
                    "finish the report",
                    "water the plants",
                ],
            ),
            (
                "item",
                &[
                    "milk",
                    "batteries",
                    "shoes",
                    "a phone charger",
                    "paper towels",
                    "coffee",
                ],
            ),
            ("store", &["amazon", "walmart", "target", "ebay"]),
            ("network", &["facebook", "instagram", "twitter", "linkedin"]),
            ("post", &["photo", "status", "latest post", "video"]),
            (
                "team",
                &[
                    "lakers",
                    "yankees",
                    "manchester united",
                    "warriors",
                    "chennai super kings",
                ],
            ),
            ("league", &["nba", "premier league", "ipl", "nfl"]),
            (
                "event",
                &[
                    "world cup",
                    "super bowl",
                    "wimbledon final",
                    "tour de france",
                ],
            ),
            (
                "athlete",
                &["virat kohli", "serena williams", "messi", "lebron james"],
            ),
            ("transit", &["train", "bus", "flight", "ferry"]),
            ("switch", &["on", "off"]),
            (
                "appliance",
                &["lights", "fan", "heater", "tv", "air conditioner"],
            ),
            ("room", &["kitchen", "bedroom", "living room", "bathroom"]),
            ("device", &["phone", "tablet", "laptop", "watch"]),
        ];

        CorpusSpec {
            templates: templates
                .into_iter()
                .map(|(class, ts)| (class, owned(ts)))
                .collect(),
            slots: slots
                .iter()
                .map(|(name, fillers)| ((*name).to_owned(), owned(fillers)))
                .collect(),
            prefixes: owned(&[
                "",
                "",
                "",
                "hey kasper",
                "ok kasper",
                "kasper",
                "excuse me",
                "quick question",
                "hey",
                "um",
                "so",
            ]),
            suffixes: owned(&[
                "",
                "",
                "",
                "please",
                "right now",
                "for me",
                "thanks",
                "if you can",
                "when you get a chance",
                "real quick",
            ]),
            seed: DEFAULT_CORPUS_SEED,
            per_class: DEFAULT_PER_CLASS,
        }
    }
}

/// Splits a template into literal text and slot names.
fn slot_names(template: &str) -> impl Iterator<Item = &str> {
    template
        .split('{')
        .skip(1)
        .filter_map(|rest| rest.split_once('}').map(|(name, _)| name))
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.per_class == 0 {
            return Err(CorpusError::ZeroPerClass);
        }
        for class in IntentClass::ALL {
            let templates = self
                .templates
                .get(&class)
                .filter(|t| !t.is_empty())
                .ok_or(CorpusError::ClassWithoutTemplates(class))?;
            for t in templates {
                for slot in slot_names(t) {
                    if self.slots.get(slot).is_none_or(|f| f.is_empty()) {
                        return Err(CorpusError::UnknownSlot {
                            template: t.clone(),
                            slot: slot.to_owned(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn expand(&self, template: &str, rng: &mut ChaCha8Rng) -> String {
        let mut out = String::new();
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = open + rest[open..].find('}').expect("validated template");
            let name = &rest[open + 1..close];
            out.push_str(self.slots[name].choose(rng).expect("validated slot"));
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        out
    }
}

/// Expands the corpus description class by class in label order. A pure
/// function of its fields, seed included.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Dataset, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pick =
        |list: &[String], rng: &mut ChaCha8Rng| list.choose(rng).cloned().unwrap_or_default();
    let mut examples = Vec::with_capacity(spec.per_class * IntentClass::ALL.len());
    for class in IntentClass::ALL {
        let templates = &spec.templates[&class];
        for _ in 0..spec.per_class {
            let template = templates.choose(&mut rng).expect("validated");
            let core = spec.expand(template, &mut rng);
            let prefix = pick(&spec.prefixes, &mut rng);
            let suffix = pick(&spec.suffixes, &mut rng);
            let text = [prefix.as_str(), core.as_str(), suffix.as_str()]
                .into_iter()
                .filter(|part| !part.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            examples.push(Example { class, text });
        }
    }
    Ok(examples.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid_and_sized() {
        let spec = CorpusSpec::default();
        assert!(spec.templates.values().all(|t| t.len() >= 3));
        let ds = generate_corpus(&spec).unwrap();
        assert_eq!(ds.len(), 1100);
        assert!(ds.class_counts().iter().all(|&n| n == 50));
        assert!(ds.iter().all(|e| !e.text.contains('{')));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let spec = CorpusSpec::default();
        let a = generate_corpus(&spec).unwrap().to_file_string();
        assert_eq!(a, generate_corpus(&spec).unwrap().to_file_string());
        let other = CorpusSpec { seed: 7, ..spec };
        assert_ne!(a, generate_corpus(&other).unwrap().to_file_string());
    }

    #[test]
    fn one_per_class() {
        let spec = CorpusSpec {
            per_class: 1,
            ..CorpusSpec::default()
        };
        assert_eq!(
            generate_corpus(&spec)
                .unwrap()
                .to_file_string()
                .lines()
                .count(),
            22
        );
    }

    #[test]
    fn missing_templates() {
        let mut spec = CorpusSpec::default();
        spec.templates.remove(&IntentClass::Weather);
        assert_eq!(
            generate_corpus(&spec).unwrap_err(),
            CorpusError::ClassWithoutTemplates(IntentClass::Weather)
        );
    }

    #[test]
    fn unknown_slot() {
        let mut spec = CorpusSpec::default();
        spec.templates
            .get_mut(&IntentClass::News)
            .unwrap()
            .push("news about {nothing}".into());
        assert!(matches!(
            generate_corpus(&spec),
            Err(CorpusError::UnknownSlot { .. })
        ));
    }
}
