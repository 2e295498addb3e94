use crate::error::Result;
use crate::runtime::RankContext;

pub fn main(ctx: &mut RankContext) -> Result<()> {
    ctx.println(format!("Hello, rank={} of {} processes", ctx.rank(), ctx.size()));
    Ok(())
}
