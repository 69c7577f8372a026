// Most-frequent coarse tag for common English words. Words missing here fall
// through to the suffix rules in `tagger.rs` and finally default to NOUN, so
// the noun list only needs words the suffix rules would get wrong.

pub(crate) const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "each", "every", "some", "any", "no",
    "all", "both", "its", "their", "his", "her", "our", "my", "your", "another", "either",
    "neither", "several", "such", "whose", "which", "what", "few", "many", "much", "most",
    "more", "less", "fewer", "certain", "various",
];

pub(crate) const VERBS: &[&str] = &[
    // auxiliaries and modals
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "having",
    "do", "does", "did", "done", "can", "could", "may", "might", "must", "shall", "should",
    "will", "would", "cannot",
    // frequent lexical verbs
    "absorb", "accept", "add", "affect", "allow", "appear", "apply", "ask", "attract", "avoid",
    "become", "became", "begin", "began", "bend", "bite", "blow", "boil", "break", "breathe",
    "bring", "brought", "build", "burn", "buy", "call", "carry", "catch", "caught", "cause",
    "change", "choose", "climb", "close", "collect", "come", "came", "compare", "conduct",
    "connect", "consist", "consume", "contain", "continue", "control", "convert", "cook",
    "cool", "cover", "create", "cross", "cut", "damage", "decay", "decompose", "decrease",
    "depend", "describe", "destroy", "detect", "determine", "develop", "die", "dig",
    "digest", "disappear", "dissolve", "divide", "drink", "drive", "drop", "dry", "eat",
    "ate", "eaten", "emit", "enable", "enter", "erode", "escape", "evaporate", "evolve",
    "exist", "expand", "explain", "expose", "fall", "feed", "fed", "feel", "fill", "find",
    "found", "flow", "fly", "follow", "form", "freeze", "froze", "frozen", "gain", "generate",
    "get", "give", "gave", "given", "go", "goes", "went", "gone", "grow", "grew", "grown",
    "happen", "harm", "hatch", "hear", "heat", "help", "hold", "hunt", "include", "increase",
    "indicate", "inherit", "insulate", "involve", "keep", "kept", "kill", "know", "knew",
    "known", "last", "lay", "lead", "led", "learn", "leave", "left", "let", "lie", "live",
    "look", "lose", "lost", "lower", "make", "made", "mean", "measure", "melt", "migrate",
    "mix", "move", "need", "observe", "occur", "open", "orbit", "pass", "perform", "pick",
    "place", "play", "pollinate", "prevent", "produce", "protect", "provide", "pull", "push",
    "put", "raise", "reach", "react", "read", "receive", "reduce", "reflect", "release",
    "remain", "remove", "reproduce", "require", "rise", "rose", "risen", "run", "ran", "say",
    "said", "see", "saw", "seen", "sense", "separate", "serve", "set", "shine", "show",
    "shrink", "sink", "sit", "sleep", "slow", "smell", "spend", "spread", "stand", "start",
    "stay", "stimulate", "stop", "store", "study", "supply", "support", "survive", "swim",
    "take", "took", "taken", "tell", "tend", "think", "throw", "transfer", "transform",
    "transmit", "transport", "travel", "turn", "understand", "use", "vary", "wait", "walk",
    "want", "warm", "wash", "wear", "weigh", "win", "work", "write", "yield",
];

pub(crate) const ADJECTIVES: &[&str] = &[
    "able", "acid", "active", "aerobic", "alive", "bad", "best", "better", "big", "black",
    "blue", "bright", "brown", "clean", "clear", "close", "cold", "common", "complex",
    "cool", "dark", "dead", "deep", "different", "dry", "early", "easy", "electric", "empty",
    "entire", "equal", "far", "fast", "fat", "few", "fine", "first", "flat", "free", "fresh",
    "full", "good", "gray", "great", "green", "grey", "hard", "healthy", "heavy", "high",
    "hot", "important", "large", "last", "late", "light", "liquid", "little", "living", "long",
    "loud", "low", "main", "major", "male", "female", "many", "mature", "most", "native",
    "natural", "new", "next", "nuclear", "old", "open", "orange", "other", "own", "pink",
    "poor", "purple", "quick", "rapid", "rare", "raw", "ready", "real", "red", "rich", "rough",
    "round", "same", "second", "sharp", "short", "simple", "single", "slow", "small", "smooth",
    "soft", "solar", "solid", "special", "static", "strong", "sweet", "tall", "thick", "thin",
    "tiny", "tropical", "true", "uneven", "useful", "various", "visible", "warm", "weak", "wet",
    "white", "whole", "wide", "wild", "yellow", "young",
];

pub(crate) const OTHER: &[&str] = &[
    // pronouns
    "i", "me", "you", "he", "him", "she", "it", "we", "us", "they", "them", "itself",
    "themselves", "himself", "herself", "something", "someone", "anyone", "everyone",
    // prepositions, conjunctions, particles
    "about", "above", "across", "after", "against", "along", "among", "around", "as", "at",
    "because", "before", "behind", "below", "beneath", "between", "beyond", "but", "by",
    "down", "during", "except", "for", "from", "if", "in", "inside", "into", "like", "near",
    "nor", "of", "off", "on", "onto", "or", "out", "outside", "over", "per", "since", "so",
    "than", "then", "through", "throughout", "to", "toward", "towards", "under", "until",
    "up", "upon", "via", "when", "where", "whether", "while", "who", "whom", "why", "how",
    "with", "within", "without", "and", "also", "not", "very", "too", "only", "just", "often",
    "always", "never", "sometimes", "usually", "there", "here", "again", "once", "yet",
    "still", "even", "ever", "about", "almost", "already", "away", "back", "together",
];

/// Nouns that a suffix rule would otherwise mis-tag.
pub(crate) const NOUNS: &[&str] = &[
    "animal", "mammal", "metal", "plastic", "music", "traffic", "fabric", "magic", "topic",
    "clinic", "thing", "something", "nothing", "everything", "anything", "string", "spring",
    "king", "ring", "wing", "building", "lightning", "morning", "evening", "ceiling",
    "clothing", "seed", "speed", "bed", "weed", "reed", "food", "blood", "flood", "wood",
    "family", "butterfly", "jelly", "belly", "lily", "ally", "bully",
    "electricity", "energy", "water", "air", "fire", "heat", "light", "sound", "power",
    "force", "friction", "gravity", "mass", "weight", "object", "oxygen", "carbon", "hydrogen",
    "nitrogen", "soil", "rock", "rocks", "sand", "cell", "cells", "plant", "plants", "tree",
    "trees", "leaf", "leaves", "root", "roots", "fish", "bird", "birds", "insect", "frog",
    "whale", "sun", "moon", "earth", "planet", "star", "ocean", "river", "lake", "forest",
    "sparks", "spark", "nucleus", "virus", "bacteria", "fungus", "species", "series", "gas",
    "process", "glass", "grass", "class", "loss", "stress", "dress", "business", "bus",
];
