//! Template-based synthetic snippets.
//!
//! Each language has its own lexicon of entity phrases and sentence templates,
//! so a corpus mixing languages behaves like a multilingual dataset with a
//! separate vocabulary per language. Languages other than `en`, `es` and `pt`
//! reuse the English material with every word suffixed by the language tag.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Sentence, Snippet, Tag, TagSet, Token};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub language: String,
    pub n_snippets: usize,
    pub tagset: TagSet,
}

impl SynthProfile {
    pub fn event(language: &str, n_snippets: usize) -> Self {
        Self {
            language: language.into(),
            n_snippets,
            tagset: TagSet::event(),
        }
    }

    pub fn ner(language: &str, n_snippets: usize) -> Self {
        Self {
            language: language.into(),
            n_snippets,
            tagset: TagSet::ner(),
        }
    }
}

struct Material {
    /// Templates whose first sentence must contain the anchor class.
    opening: &'static [&'static str],
    /// Templates for follow-up sentences.
    follow: &'static [&'static str],
    lexicon: &'static [(&'static str, &'static [&'static str])],
}

const EN_EVENT: Material = Material {
    opening: &[
        "{participant} {trigger} against {target} at {fname} in {place} on {time} .",
        "On {time} , hundreds of {participant} {trigger} in {place} .",
        "{organizer} said {participant} {trigger} outside {fname} on {time} .",
        "Police said {participant} {trigger} near {fname} in {place} .",
        "{participant} from {organizer} {trigger} over {target} in {place} .",
        "Angry {participant} {trigger} at {fname} demanding action from {target} .",
    ],
    follow: &[
        "The protest was organised by {organizer} .",
        "Police were deployed across {place} .",
        "Leaders of {organizer} accused {target} of ignoring them .",
        "The crowd later moved to {fname} .",
        "Officials said talks would resume on {time} .",
        "Several {participant} were detained by police .",
    ],
    lexicon: &[
        (
            "trigger",
            &[
                "protested",
                "marched",
                "rallied",
                "demonstrated",
                "went on strike",
                "picketed",
                "staged a sit-in",
                "blocked roads",
            ],
        ),
        (
            "participant",
            &[
                "workers",
                "students",
                "farmers",
                "teachers",
                "nurses",
                "taxi drivers",
                "residents",
                "miners",
                "factory workers",
                "pensioners",
            ],
        ),
        (
            "organizer",
            &[
                "Workers Union",
                "Student Federation",
                "Farmers Alliance",
                "Green Front",
                "Teachers Guild",
                "Labour Council",
                "Civic Forum",
            ],
        ),
        (
            "place",
            &[
                "Chennai",
                "Mumbai",
                "Kolkata",
                "Bangalore",
                "Hyderabad",
                "Lucknow",
                "New Delhi",
                "Pune",
            ],
        ),
        (
            "time",
            &[
                "Monday",
                "Tuesday",
                "Wednesday",
                "Thursday",
                "Friday",
                "Saturday",
                "Sunday evening",
            ],
        ),
        (
            "fname",
            &[
                "Azad Maidan",
                "Freedom Park",
                "Central Station",
                "City Hall",
                "Town Square",
                "Marina Beach",
                "Ramlila Ground",
            ],
        ),
        (
            "target",
            &[
                "fuel prices",
                "tax reform",
                "state government",
                "Health Ministry",
                "mining company",
                "pension cuts",
                "water privatisation",
            ],
        ),
    ],
};

const ES_EVENT: Material = Material {
    opening: &[
        "{participant} {trigger} contra {target} en {place} el {time} .",
        "El {time} , cientos de {participant} {trigger} frente a {fname} .",
        "{organizer} informó que los {participant} {trigger} en {place} .",
        "Según la policía , {participant} {trigger} junto a {fname} en {place} .",
        "Los {participant} de {organizer} {trigger} por {target} .",
    ],
    follow: &[
        "La protesta fue convocada por {organizer} .",
        "La policía vigiló las calles de {place} .",
        "Dirigentes de {organizer} criticaron a {target} .",
        "La marcha terminó en {fname} .",
        "Varios {participant} fueron detenidos .",
    ],
    lexicon: &[
        (
            "trigger",
            &[
                "protestaron",
                "marcharon",
                "se manifestaron",
                "hicieron huelga",
                "bloquearon vías",
                "ocuparon",
                "se concentraron",
            ],
        ),
        (
            "participant",
            &[
                "trabajadores",
                "estudiantes",
                "campesinos",
                "maestros",
                "enfermeras",
                "mineros",
                "jubilados",
                "transportistas",
            ],
        ),
        (
            "organizer",
            &[
                "Central Obrera",
                "Frente Estudiantil",
                "Sindicato Minero",
                "Colectivo Tierra",
                "Federación Docente",
                "Unión Campesina",
            ],
        ),
        (
            "place",
            &[
                "Bogotá",
                "Lima",
                "Quito",
                "Santiago",
                "Caracas",
                "Medellín",
                "La Paz",
                "Rosario",
            ],
        ),
        ("time", &["lunes", "martes", "miércoles", "jueves", "viernes", "sábado"]),
        (
            "fname",
            &[
                "Plaza Mayor",
                "Palacio Municipal",
                "Plaza Bolívar",
                "Congreso Nacional",
                "Estadio Central",
                "Avenida Libertador",
            ],
        ),
        (
            "target",
            &[
                "reforma tributaria",
                "gobierno regional",
                "empresa minera",
                "recortes salariales",
                "privatización",
                "ley laboral",
            ],
        ),
    ],
};

const PT_EVENT: Material = Material {
    opening: &[
        "{participant} {trigger} contra {target} em {place} na {time} .",
        "Na {time} , centenas de {participant} {trigger} diante da {fname} .",
        "A {organizer} disse que os {participant} {trigger} em {place} .",
        "Segundo a polícia , {participant} {trigger} perto da {fname} em {place} .",
        "Os {participant} da {organizer} {trigger} contra {target} .",
    ],
    follow: &[
        "O protesto foi organizado pela {organizer} .",
        "A polícia acompanhou o ato em {place} .",
        "Líderes da {organizer} criticaram {target} .",
        "A marcha terminou na {fname} .",
        "Vários {participant} foram detidos .",
    ],
    lexicon: &[
        (
            "trigger",
            &[
                "protestaram",
                "marcharam",
                "fizeram greve",
                "ocuparam",
                "bloquearam estradas",
                "se manifestaram",
                "paralisaram",
            ],
        ),
        (
            "participant",
            &[
                "trabalhadores",
                "estudantes",
                "professores",
                "agricultores",
                "enfermeiros",
                "metalúrgicos",
                "aposentados",
                "caminhoneiros",
            ],
        ),
        (
            "organizer",
            &[
                "Central Sindical",
                "Frente Popular",
                "Sindicato Metalúrgico",
                "Movimento Sem Terra",
                "União Estudantil",
                "Força Operária",
            ],
        ),
        (
            "place",
            &[
                "Recife",
                "Salvador",
                "Curitiba",
                "Fortaleza",
                "Manaus",
                "Porto Alegre",
                "Belo Horizonte",
                "Lisboa",
            ],
        ),
        (
            "time",
            &[
                "segunda-feira",
                "terça-feira",
                "quarta-feira",
                "quinta-feira",
                "sexta-feira",
            ],
        ),
        (
            "fname",
            &[
                "Praça Central",
                "Avenida Paulista",
                "Assembleia Legislativa",
                "Esplanada Federal",
                "Câmara Municipal",
                "Estação Rodoviária",
            ],
        ),
        (
            "target",
            &[
                "reforma previdenciária",
                "governo estadual",
                "mineradora",
                "cortes salariais",
                "privatização",
                "lei trabalhista",
            ],
        ),
    ],
};

const EN_NER: Material = Material {
    opening: &[
        "{person} , a spokesman for {organization} , spoke in {location} .",
        "{organization} opened a new office in {location} .",
        "{person} visited {location} last week .",
    ],
    follow: &[
        "{person} said {organization} would expand .",
        "Shares of {organization} rose .",
        "The meeting was held in {location} .",
    ],
    lexicon: &[
        (
            "person",
            &[
                "John Smith",
                "Maria Lopez",
                "Ahmed Khan",
                "Priya Nair",
                "David Brown",
                "Chen Wei",
                "Anna Schmidt",
            ],
        ),
        (
            "organization",
            &[
                "Reuters",
                "United Nations",
                "World Bank",
                "Red Cross",
                "General Motors",
                "Siemens",
            ],
        ),
        (
            "location",
            &["Paris", "London", "Texas", "Kenya", "Berlin", "Tokyo", "Cairo"],
        ),
    ],
};

const ES_NER: Material = Material {
    opening: &[
        "{person} , portavoz de {organization} , habló en {location} .",
        "{organization} abrió una oficina en {location} .",
        "{person} visitó {location} la semana pasada .",
    ],
    follow: &[
        "{person} dijo que {organization} crecerá .",
        "La reunión se celebró en {location} .",
    ],
    lexicon: &[
        (
            "person",
            &[
                "Juan Pérez",
                "Lucía Gómez",
                "Carlos Ruiz",
                "Ana Torres",
                "Miguel Ángel Díaz",
            ],
        ),
        (
            "organization",
            &[
                "Telefónica",
                "Banco Santander",
                "Naciones Unidas",
                "Cruz Roja",
                "Iberdrola",
            ],
        ),
        (
            "location",
            &["Madrid", "Sevilla", "Valencia", "México", "Bilbao", "Granada"],
        ),
    ],
};

const PT_NER: Material = Material {
    opening: &[
        "{person} , porta-voz da {organization} , falou em {location} .",
        "A {organization} abriu um escritório em {location} .",
        "{person} visitou {location} na semana passada .",
    ],
    follow: &[
        "{person} disse que a {organization} vai crescer .",
        "A reunião aconteceu em {location} .",
    ],
    lexicon: &[
        (
            "person",
            &[
                "João Silva",
                "Maria Santos",
                "Pedro Costa",
                "Ana Oliveira",
                "Luís Ferreira",
            ],
        ),
        (
            "organization",
            &["Petrobras", "Banco do Brasil", "Vale", "Embraer", "Cruz Vermelha"],
        ),
        (
            "location",
            &["Brasília", "Coimbra", "Campinas", "Natal", "Braga", "Goiânia"],
        ),
    ],
};

fn material(language: &str, tagset: &TagSet) -> Option<&'static Material> {
    let ner = match tagset.classes() {
        c if c == TagSet::event().classes() => false,
        c if c == TagSet::ner().classes() => true,
        _ => return None,
    };
    Some(match (language, ner) {
        ("es", false) => &ES_EVENT,
        ("pt", false) => &PT_EVENT,
        ("es", true) => &ES_NER,
        ("pt", true) => &PT_NER,
        (_, false) => &EN_EVENT,
        (_, true) => &EN_NER,
    })
}

fn localise(word: &str, language: &str) -> String {
    match language {
        "en" | "es" | "pt" => word.to_string(),
        _ if word.chars().all(|c| c.is_ascii_punctuation()) => word.to_string(),
        _ => format!("{word}-{language}"),
    }
}

fn pick<'a, T>(rng: &mut seed::Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn render(template: &str, m: &Material, language: &str, rng: &mut seed::Rng) -> Sentence {
    let mut tokens = Vec::new();
    for piece in template.split_whitespace() {
        match piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
            Some(class) => {
                let entries = m
                    .lexicon
                    .iter()
                    .find(|(c, _)| *c == class)
                    .map(|(_, e)| *e)
                    .expect("templates only name classes in the lexicon");
                for (k, w) in pick(rng, entries).split_whitespace().enumerate() {
                    let gold = if k == 0 { Tag::begin(class) } else { Tag::inside(class) };
                    tokens.push(Token {
                        text: localise(w, language),
                        gold: Some(gold),
                    });
                }
            }
            None => tokens.push(Token {
                text: localise(piece, language),
                gold: Some(Tag::Outside),
            }),
        }
    }
    Sentence { tokens }
}

/// Generic material for tag sets without a lexicon: every class gets a handful
/// of pseudo-words and each sentence mentions one to three random classes.
fn render_generic(tagset: &TagSet, language: &str, rng: &mut seed::Rng) -> Sentence {
    let mut tokens = Vec::new();
    let n_mentions = rng.random_range(1..=3);
    for _ in 0..n_mentions {
        for filler in ["the", "report", "mentions"] {
            tokens.push(Token {
                text: localise(filler, language),
                gold: Some(Tag::Outside),
            });
        }
        let class = pick(rng, tagset.classes()).clone();
        let len = rng.random_range(1..=2);
        for k in 0..len {
            let word = format!("{}{}", class, rng.random_range(0..5));
            let gold = if k == 0 {
                Tag::begin(&class)
            } else {
                Tag::inside(&class)
            };
            tokens.push(Token {
                text: localise(&word, language),
                gold: Some(gold),
            });
        }
    }
    tokens.push(Token {
        text: ".".into(),
        gold: Some(Tag::Outside),
    });
    Sentence { tokens }
}

/// Generates `profile.n_snippets` snippets, deterministically in `seed`.
///
/// For the event tag set every snippet opens with a sentence containing a
/// trigger; all gold sequences are valid BIO.
pub fn generate_synthetic_corpus(profile: &SynthProfile, seed: u64) -> Vec<Snippet> {
    let mut rng = seed::rng(seed::derive(seed, &format!("synth:{}", profile.language)));
    let m = material(&profile.language, &profile.tagset);
    (0..profile.n_snippets)
        .map(|i| {
            let n_sentences = *pick(&mut rng, &[1, 2, 2, 3]);
            let sentences = (0..n_sentences)
                .map(|s| match m {
                    Some(m) => {
                        let templates = if s == 0 { m.opening } else { m.follow };
                        let t = *pick(&mut rng, templates);
                        render(t, m, &profile.language, &mut rng)
                    }
                    None => render_generic(&profile.tagset, &profile.language, &mut rng),
                })
                .collect();
            Snippet {
                id: format!("{}-{:04}", profile.language, i),
                sentences,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll, write_conll};

    #[test]
    fn zero_snippets() {
        assert!(generate_synthetic_corpus(&SynthProfile::event("en", 0), 1).is_empty());
    }

    #[test]
    fn deterministic_in_seed() {
        let p = SynthProfile::event("es", 33);
        let a = write_conll(&generate_synthetic_corpus(&p, 7));
        let b = write_conll(&generate_synthetic_corpus(&p, 7));
        assert_eq!(a, b);
        assert_ne!(a, write_conll(&generate_synthetic_corpus(&p, 8)));
    }

    #[test]
    fn table_scale_profiles() {
        for (lang, n) in [("en", 808), ("es", 33), ("pt", 30)] {
            let c = generate_synthetic_corpus(&SynthProfile::event(lang, n), 3);
            assert_eq!(c.len(), n);
            let reparsed = parse_conll(&write_conll(&c), &TagSet::event()).unwrap();
            assert_eq!(reparsed, c);
        }
    }

    #[test]
    fn every_snippet_is_valid_and_has_a_trigger() {
        for lang in ["en", "es", "pt", "hi"] {
            for s in generate_synthetic_corpus(&SynthProfile::event(lang, 200), 11) {
                assert!(s.bio_violations().is_empty());
                assert!(s.gold().iter().any(|t| t == &Some(Tag::begin("trigger"))), "{}", s.id);
                assert!(s
                    .tokens()
                    .all(|t| !t.text.is_empty() && !t.text.contains(char::is_whitespace)));
            }
        }
    }

    #[test]
    fn all_seven_classes_appear() {
        let c = generate_synthetic_corpus(&SynthProfile::event("en", 100), 2);
        let ts = TagSet::event();
        for class in ts.classes() {
            assert!(
                c.iter()
                    .flat_map(|s| s.gold())
                    .any(|t| t == Some(Tag::begin(class.as_str()))),
                "{class}"
            );
        }
    }

    #[test]
    fn ner_and_custom_tag_sets() {
        let c = generate_synthetic_corpus(&SynthProfile::ner("pt", 20), 2);
        assert!(c.iter().all(|s| s.bio_violations().is_empty()));
        let custom = TagSet::new("toy", vec!["alpha".into(), "beta".into()]).unwrap();
        let p = SynthProfile {
            language: "en".into(),
            n_snippets: 10,
            tagset: custom.clone(),
        };
        for s in generate_synthetic_corpus(&p, 4) {
            assert!(s.bio_violations().is_empty());
            assert!(s.gold().iter().flatten().all(|t| custom.contains(t)));
        }
    }
}
