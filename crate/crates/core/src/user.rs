use std::fmt;

/// One of the three uplink users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum User {
    A,
    B,
    C,
}

impl User {
    pub const ALL: [User; 3] = [User::A, User::B, User::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for User {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            User::A => "A",
            User::B => "B",
            User::C => "C",
        };
        f.write_str(s)
    }
}
