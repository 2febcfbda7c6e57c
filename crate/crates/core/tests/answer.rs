use sceneact_core::answer::*;

#[test]
fn vocabulary_order() {
    let names: Vec<String> = Answer::all().into_iter().map(Answer::name).collect();
    let expected = "0 1 2 3 4 5 6 7 8 9 yes no cylinder sphere cube small big metal rubber \
                    red green gray blue brown yellow purple cyan";
    assert_eq!(names.join(" "), expected);
}

#[test]
fn index_round_trip() {
    for (i, a) in Answer::all().into_iter().enumerate() {
        assert_eq!(a.index(), i);
        assert_eq!(Answer::parse(&a.name()), Some(a));
    }
    assert_eq!(Answer::from_index(27), None);
}

#[test]
fn counts_saturate() {
    assert_eq!(Answer::count(12), Answer::Count(9));
}
